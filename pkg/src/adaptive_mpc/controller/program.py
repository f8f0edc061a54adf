"""Dualised policy program.

The uncertainty is lifted to ``(w_0..w_{N-1}, theta_0..theta_{N-1})`` whose
feasible set is a product of per-stage blocks (``W`` boxes and predicted
offset sets).  For each constraint row the worst case splits over blocks,
and each block maximum is replaced by its LP dual:

    max_{S xi <= s} a'xi  =  min_{z >= 0, S'z = a} s'z

with ``a`` affine in the feedback gains.  Blocks whose coefficient vanishes
identically are skipped, which is exact.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import DimensionMismatch
from ..geometry import Polytope
from ..solver import LpProblem, QpProblem, require_optimal, solve_lp
from .model import StackedModel


@dataclass(frozen=True, eq=False)
class UncertaintyStack:
    """``W^N x Theta_{t|t} x ... x Theta_{t+N-1|t}`` stored block by block."""

    W_H: np.ndarray
    W_h: np.ndarray
    theta_sets: tuple
    E: np.ndarray

    @classmethod
    def from_sets(cls, W, theta_sets, E):
        Wp = W.to_polytope()
        return cls(Wp.H, Wp.h, tuple(theta_sets), np.atleast_2d(E))

    @property
    def N(self):
        return len(self.theta_sets)

    def block(self, kind, j):
        if kind == "w":
            return self.W_H, self.W_h
        return self.theta_sets[j].H, self.theta_sets[j].h

    def lifted(self) -> Polytope:
        """The whole product set as one block-diagonal polytope over ``(w, theta)``."""
        blocks = [self.W_H] * self.N + [T.H for T in self.theta_sets]
        offs = [self.W_h] * self.N + [T.h for T in self.theta_sets]
        return Polytope(sp.block_diag(blocks).toarray(), np.concatenate(offs))


@dataclass(eq=False)
class PolicyProgram:
    qp: QpProblem
    n_M: int
    v_slice: slice
    M_index: dict
    row_blocks: list
    model: StackedModel
    stack: UncertaintyStack

    def decode(self, z):
        sm = self.model
        N, n, m = sm.N, sm.n, sm.m
        M = np.zeros((m * N, n * N))
        for (k, j), idx in self.M_index.items():
            M[k * m:(k + 1) * m, j * n:(j + 1) * n] = z[idx]
        v = z[self.v_slice]
        bounds = np.zeros(sm.rows)
        for r, blocks in enumerate(self.row_blocks):
            for _, _, zidx, hvec in blocks:
                bounds[r] += hvec @ z[zidx]
        return M, v, bounds


def _row_coefficients(sm, r, j):
    """``f``-entries of row ``r`` that multiply ``M_{k,j}`` (``k > j``), and the direct term."""
    n, m = sm.n, sm.m
    f = sm.F[r]
    deps = [(k, l, f[k * m + l]) for k in range(j + 1, sm.N) for l in range(m)
            if f[k * m + l] != 0.0]
    return deps, sm.G[r, j * n:(j + 1) * n], sm.G_theta[r, j * sm.p:(j + 1) * sm.p]


def cost_terms(sm: StackedModel, x_t, theta_bar=None):
    """Hessian, linear term and constant of the nominal cost as a function of ``v``."""
    x_t = np.asarray(x_t, dtype=float).reshape(-1)
    N, m = sm.N, sm.m
    drift = np.zeros(sm.n * N)
    if theta_bar is not None:
        drift = sm.E_bold @ np.tile(np.asarray(theta_bar, dtype=float), N)
    Hv = np.kron(np.eye(N), sm.R).astype(float)
    fv = np.zeros(m * N)
    const = 0.0
    for k in range(N + 1):
        W = sm.P_f if k == N else sm.P
        e = sm.A_pow[k] @ x_t + sm.calC[k] @ drift
        Bk = sm.calB[k]
        Hv = Hv + Bk.T @ W @ Bk
        fv = fv + Bk.T @ W @ e
        const += float(e @ W @ e)
    Hv = 0.5 * (Hv + Hv.T)
    return 2.0 * Hv, 2.0 * fv, const


def assemble_program(sm: StackedModel, us: UncertaintyStack, sys, x_t, theta_bar=None) -> PolicyProgram:
    x_t = np.asarray(x_t, dtype=float).reshape(-1)
    N, n, m, p = sm.N, sm.n, sm.m, sm.p
    if us.N != N:
        raise DimensionMismatch(f"uncertainty stack has {us.N} stages, model has {N}")
    E = us.E

    # free gains: blocks strictly below the diagonal only
    M_index, nxt = {}, 0
    for k in range(1, N):
        for j in range(k):
            M_index[(k, j)] = np.arange(nxt, nxt + m * n).reshape(m, n)
            nxt += m * n
    n_M = nxt
    v0 = n_M
    nz = v0 + m * N

    eq_r, eq_c, eq_v, eq_b = [], [], [], []
    ub_r, ub_c, ub_v = [], [], []
    row_blocks = []
    n_eq = 0
    rhs = sm.c + sm.H @ x_t
    for r in range(sm.rows):
        blocks = []
        f = sm.F[r]
        nzf = np.flatnonzero(f)
        ub_r.append(np.full(nzf.size, r))
        ub_c.append(v0 + nzf)
        ub_v.append(f[nzf])
        for j in range(N):
            deps, g_j, gt_j = _row_coefficients(sm, r, j)
            w_live = bool(deps) or np.any(g_j != 0.0)
            t_live = (w_live and np.any(E != 0.0)) or np.any(gt_j != 0.0)
            if w_live:
                S, s = us.block("w", j)
                zidx = np.arange(nz, nz + S.shape[0])
                nz += S.shape[0]
                for i in range(n):
                    cols = [zidx]
                    vals = [S[:, i]]
                    for k, l, fk in deps:
                        cols.append([M_index[(k, j)][l, i]])
                        vals.append([-fk])
                    cols = np.concatenate(cols)
                    eq_r.append(np.full(cols.size, n_eq))
                    eq_c.append(cols)
                    eq_v.append(np.concatenate(vals))
                    eq_b.append(g_j[i])
                    n_eq += 1
                blocks.append(("w", j, zidx, s))
                ub_r.append(np.full(zidx.size, r))
                ub_c.append(zidx)
                ub_v.append(s)
            if t_live:
                S, s = us.block("theta", j)
                zidx = np.arange(nz, nz + S.shape[0])
                nz += S.shape[0]
                rhs_t = E.T @ g_j + gt_j
                for q in range(p):
                    cols = [zidx]
                    vals = [S[:, q]]
                    for k, l, fk in deps:
                        ev = E[:, q]
                        live = np.flatnonzero(ev)
                        cols.append(M_index[(k, j)][l, live])
                        vals.append(-fk * ev[live])
                    cols = np.concatenate(cols)
                    eq_r.append(np.full(cols.size, n_eq))
                    eq_c.append(cols)
                    eq_v.append(np.concatenate(vals))
                    eq_b.append(rhs_t[q])
                    n_eq += 1
                blocks.append(("theta", j, zidx, s))
                ub_r.append(np.full(zidx.size, r))
                ub_c.append(zidx)
                ub_v.append(s)
        row_blocks.append(blocks)

    n_rows = sm.rows
    n_dual = nz - (v0 + m * N)
    # multiplier signs
    ub_r.append(n_rows + np.arange(n_dual))
    ub_c.append(v0 + m * N + np.arange(n_dual))
    ub_v.append(-np.ones(n_dual))
    b_ub = np.concatenate([rhs, np.zeros(n_dual)])

    A_ub = sp.csc_matrix((np.concatenate(ub_v), (np.concatenate(ub_r), np.concatenate(ub_c))),
                         shape=(n_rows + n_dual, nz))
    if n_eq:
        A_eq = sp.csc_matrix((np.concatenate(eq_v), (np.concatenate(eq_r), np.concatenate(eq_c))),
                             shape=(n_eq, nz))
    else:
        A_eq = sp.csc_matrix((0, nz))
    Hv, fv, const = cost_terms(sm, x_t, theta_bar)
    Hq = sp.lil_matrix((nz, nz))
    Hq[v0:v0 + m * N, v0:v0 + m * N] = Hv
    f = np.zeros(nz)
    f[v0:v0 + m * N] = fv
    qp = QpProblem(Hq.tocsc(), f, A_ub, b_ub, A_eq, np.asarray(eq_b, dtype=float), const)
    return PolicyProgram(qp, n_M, slice(v0, v0 + m * N), M_index, row_blocks, sm, us)


def dual_row_bounds(sm: StackedModel, us: UncertaintyStack, M):
    """Tightest dual bound of every row's worst case for fixed feedback gains ``M``.

    Each block bound is the LP ``min s'z  s.t.  S'z = a, z >= 0``.
    """
    N, n, p = sm.N, sm.n, sm.p
    coef = sm.F @ M + sm.G
    out = np.zeros(sm.rows)
    for r in range(sm.rows):
        for j in range(N):
            a = coef[r, j * n:(j + 1) * n]
            b = us.E.T @ a + sm.G_theta[r, j * p:(j + 1) * p]
            for kind, vec in (("w", a), ("theta", b)):
                if not np.any(vec != 0.0):
                    continue
                S, s = us.block(kind, j)
                k = S.shape[0]
                res = require_optimal(solve_lp(LpProblem(s, -np.eye(k), np.zeros(k), S.T, vec)),
                                      "row bound")
                out[r] += res.objective
    return out

"""Stacked prediction model and constraint rows over the horizon.

With ``d_j = w_j + E theta_j`` and ``u = v + M d`` the predicted state is

    x_k = A^k x_t + B_k u + C_k d

where ``B_k = [A^{k-1}B, ..., B, 0, ...]`` and ``C_k = [A^{k-1}, ..., I, 0, ...]``.
Every constraint row is stored as

    F[r] u + G[r] d + G_theta[r] theta <= c[r] + H[r] x_t

which covers the robust rows, the quantile-tightened chance rows (whose
``E theta_k`` term is not routed through ``d``) and the hard input rows.
"""
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch
from ..system import Mode


@dataclass(frozen=True, eq=False)
class StackedModel:
    N: int
    n: int
    m: int
    p: int
    A_pow: tuple
    calB: tuple
    calC: tuple
    E_bold: np.ndarray
    F: np.ndarray
    G: np.ndarray
    G_theta: np.ndarray
    c: np.ndarray
    H: np.ndarray
    stage: np.ndarray
    kind: tuple
    P: np.ndarray = None
    R: np.ndarray = None
    P_f: np.ndarray = None
    Hu_bar: np.ndarray = None
    hu_bar: np.ndarray = None

    @property
    def rows(self):
        return self.c.size

    def rows_of(self, kind):
        return np.array([i for i, k in enumerate(self.kind) if k == kind], dtype=int)


def prediction_matrices(A, B, N):
    """``A^k``, ``B_k`` and ``C_k`` for ``k = 0..N``."""
    n, m = B.shape
    A_pow = [np.eye(n)]
    for _ in range(N):
        A_pow.append(A @ A_pow[-1])
    calB, calC = [], []
    for k in range(N + 1):
        Bk = np.zeros((n, m * N))
        Ck = np.zeros((n, n * N))
        for j in range(k):
            Bk[:, j * m:(j + 1) * m] = A_pow[k - 1 - j] @ B
            Ck[:, j * n:(j + 1) * n] = A_pow[k - 1 - j]
        calB.append(Bk)
        calC.append(Ck)
    return tuple(A_pow), tuple(calB), tuple(calC)


def _unit_block(k, m, N):
    S = np.zeros((m, m * N))
    S[:, k * m:(k + 1) * m] = np.eye(m)
    return S


def build_stacked_model(sys, x_t, terminal, quantiles=None) -> StackedModel:
    """Rows of the robust or stochastic program for the given terminal set.

    ``x_t`` only enters through the right-hand sides; it is accepted here so
    dimension errors surface before assembly.
    """
    x_t = np.asarray(x_t, dtype=float).reshape(-1)
    if x_t.size != sys.n:
        raise DimensionMismatch(f"state has {x_t.size} entries, model expects {sys.n}")
    A, B, E, N = sys.A, sys.B, sys.E, int(sys.N)
    n, m, p = sys.n, sys.m, sys.p
    A_pow, calB, calC = prediction_matrices(A, B, N)
    Y, z = terminal.X_term.H, terminal.X_term.h
    if Y.shape[1] != n:
        raise DimensionMismatch("terminal set dimension differs from the state dimension")

    F, G, Gt, c, H, stage, kind = [], [], [], [], [], [], []

    def add(f, g, gt, cc, hh, k, label):
        F.append(np.atleast_2d(f))
        G.append(np.atleast_2d(g))
        Gt.append(np.atleast_2d(gt))
        c.append(np.atleast_1d(cc))
        H.append(np.atleast_2d(hh))
        stage.extend([k] * np.atleast_1d(cc).size)
        kind.extend([label] * np.atleast_1d(cc).size)

    zero_t = lambda r: np.zeros((r, p * N))
    Hu_bar = hu_bar = None
    if sys.mode is Mode.ROBUST:
        C, D, b = sys.robust.C, sys.robust.D, sys.robust.b
        s = b.size
        for k in range(N):
            add(C @ calB[k] + D @ _unit_block(k, m, N), C @ calC[k], zero_t(s), b,
                -C @ A_pow[k], k, "stage")
    else:
        cc_ = sys.chance
        if quantiles is None:
            raise ValueError("stochastic rows need the chance-constraint quantiles")
        q = np.asarray(quantiles, dtype=float).reshape(-1)
        if q.size != cc_.h.size:
            raise DimensionMismatch("one quantile per chance-constraint row is required")
        Gm = cc_.G
        s = Gm.shape[0]
        for k in range(N):
            # next state without w_k, whose effect is covered by the quantile
            gt = np.zeros((s, p * N))
            gt[:, k * p:(k + 1) * p] = Gm @ E
            add(Gm @ calB[k + 1], Gm @ A @ calC[k], gt, cc_.h - q, -Gm @ A_pow[k + 1], k, "chance")
        o = cc_.h_u.size
        for k in range(N):
            add(cc_.H_u @ _unit_block(k, m, N), np.zeros((o, n * N)), zero_t(o), cc_.h_u,
                np.zeros((o, n)), k, "input")
        Hu_bar = np.kron(np.eye(N), cc_.H_u)
        hu_bar = np.tile(cc_.h_u, N)
    add(Y @ calB[N], Y @ calC[N], zero_t(Y.shape[0]), z, -Y @ A_pow[N], N, "terminal")

    E_bold = np.kron(np.eye(N), E)
    return StackedModel(N, n, m, p, A_pow, calB, calC, E_bold, np.vstack(F), np.vstack(G),
                        np.vstack(Gt), np.concatenate(c), np.vstack(H), np.array(stage),
                        tuple(kind), sys.P, sys.R, terminal.P_f, Hu_bar, hu_bar)

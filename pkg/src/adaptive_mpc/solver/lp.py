"""Dense two-phase revised simplex with Bland's anti-cycling rule.

Problems handled here are small (set operations on polytopes with a few dozen
rows), so the basis matrix is refactorised from scratch at every pivot.  That
keeps the iterates reproducible and avoids drift in an updated inverse.
"""
import numpy as np

from ..errors import NumericalFailure
from ..tolerances import TOL
from .types import LpProblem, SolveResult, Status


def solve_lp(p: LpProblem) -> SolveResult:
    """Solve ``min c'z s.t. A_ub z <= b_ub, A_eq z = b_eq`` over free ``z``.

    Returns a :class:`SolveResult` whose ``dual_ub``/``dual_eq`` satisfy
    ``c + A_ub' dual_ub + A_eq' dual_eq = 0`` with ``dual_ub >= 0`` at optimum,
    so that ``objective = -(b_ub' dual_ub + b_eq' dual_eq)``.

    Raises
    ------
    NumericalFailure
        When the pivot count exceeds ``10 * (rows + cols)`` of the standard form.
    """
    n, m_ub, m_eq = p.n, p.A_ub.shape[0], p.A_eq.shape[0]
    m = m_ub + m_eq

    # standard form: z = z_plus - z_minus, slack s >= 0 on the inequality rows
    A = np.zeros((m, 2 * n + m_ub))
    A[:m_ub, :n] = p.A_ub
    A[:m_ub, n:2 * n] = -p.A_ub
    A[:m_ub, 2 * n:] = np.eye(m_ub)
    A[m_ub:, :n] = p.A_eq
    A[m_ub:, n:2 * n] = -p.A_eq
    b = np.concatenate([p.b_ub, p.b_eq])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign

    # slacks of rows that kept their sign start basic; everything else gets an artificial
    basis = np.full(m, -1)
    need_art = []
    for i in range(m):
        if i < m_ub and sign[i] > 0:
            basis[i] = 2 * n + i
        else:
            need_art.append(i)
    n_real = A.shape[1]
    n_art = len(need_art)
    if n_art:
        art = np.zeros((m, n_art))
        for k, i in enumerate(need_art):
            art[i, k] = 1.0
            basis[i] = n_real + k
        A = np.hstack([A, art])

    max_iter = 10 * (A.shape[0] + A.shape[1])
    rows = np.arange(m)
    iters = 0

    if n_art:
        c1 = np.zeros(A.shape[1])
        c1[n_real:] = 1.0
        status, basis, it = _simplex(A, b, c1, basis, np.ones(A.shape[1], bool), max_iter)
        iters += it
        if status is Status.MAX_ITER:
            raise NumericalFailure("simplex phase 1 hit the iteration cap")
        xB = np.linalg.solve(A[:, basis], b)
        if float(np.sum(xB[basis >= n_real])) > TOL.lp_feasibility * max(1.0, np.abs(b).max()):
            return SolveResult(Status.INFEASIBLE, np.full(n, np.nan), np.zeros(m_ub),
                               float("nan"), np.zeros(m_eq), iters)
        A, b, basis, rows = _drive_out_artificials(A, b, basis, rows, n_real)
        A = A[:, :n_real]

    c2 = np.concatenate([p.c, -p.c, np.zeros(m_ub)])
    status, basis, it = _simplex(A, b, c2, basis, np.ones(n_real, bool), max_iter)
    iters += it
    if status is Status.MAX_ITER:
        raise NumericalFailure("simplex phase 2 hit the iteration cap")
    if status is Status.UNBOUNDED:
        return SolveResult(Status.UNBOUNDED, np.full(n, np.nan), np.zeros(m_ub),
                           float("-inf"), np.zeros(m_eq), iters)

    B = A[:, basis]
    xB = np.linalg.solve(B, b)
    xB[xB < 0] = 0.0
    y = np.zeros(A.shape[1])
    y[basis] = xB
    z = y[:n] - y[n:2 * n]

    dual_std = np.linalg.solve(B.T, c2[basis])
    y_full = np.zeros(m)
    y_full[rows] = dual_std * sign[rows]
    dual_ub = np.maximum(-y_full[:m_ub], 0.0)
    dual_eq = -y_full[m_ub:]
    return SolveResult(Status.OPTIMAL, z, dual_ub, float(p.c @ z), dual_eq, iters)


def _simplex(A, b, c, basis, allowed, max_iter):
    basis = basis.copy()
    for it in range(max_iter):
        B = A[:, basis]
        xB = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, c[basis])
        reduced = c - A.T @ y
        is_basic = np.zeros(A.shape[1], bool)
        is_basic[basis] = True
        candidates = np.flatnonzero(allowed & ~is_basic & (reduced < -TOL.lp_optimality))
        if candidates.size == 0:
            return Status.OPTIMAL, basis, it
        j = candidates[0]
        d = np.linalg.solve(B, A[:, j])
        pos = d > TOL.lp_pivot
        if not pos.any():
            return Status.UNBOUNDED, basis, it
        ratios = np.full(d.size, np.inf)
        ratios[pos] = np.maximum(xB[pos], 0.0) / d[pos]
        best = ratios.min()
        ties = np.flatnonzero(ratios <= best + TOL.lp_pivot)
        leave = ties[np.argmin(basis[ties])]
        basis[leave] = j
    return Status.MAX_ITER, basis, max_iter


def _drive_out_artificials(A, b, basis, rows, n_real):
    """Pivot zero-level artificials out of the basis; drop rows that are linearly dependent."""
    i = 0
    while i < basis.size:
        if basis[i] < n_real:
            i += 1
            continue
        Binv_row = np.linalg.solve(A[:, basis].T, np.eye(basis.size)[i])
        row = Binv_row @ A[:, :n_real]
        row[basis[basis < n_real]] = 0.0
        cand = np.flatnonzero(np.abs(row) > 1e-9)
        if cand.size:
            basis[i] = cand[0]
            i += 1
        else:
            keep = np.arange(basis.size) != i
            A, b, basis, rows = A[keep], b[keep], basis[keep], rows[keep]
    return A, b, basis, rows

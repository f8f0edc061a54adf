"""Convex quadratic programming.

Two back ends sit behind :func:`solve_qp`:

* ``"active_set"`` -- a dense primal active-set method with an exact
  equality-constrained KKT solve at each iteration.  Used for small programs
  (projections, nominal MPC) where exact active sets matter.
* ``"interior"`` -- the Clarabel interior-point solver on sparse data, used for
  the dualised robust/stochastic MPC programs whose size (a few thousand
  multipliers) is out of reach for a dense method.
"""
import numpy as np
import scipy.sparse as sp

from ..errors import InfeasibleError, NumericalFailure
from ..tolerances import TOL
from .lp import solve_lp
from .types import LpProblem, QpProblem, SolveResult, Status


def solve_qp(p: QpProblem, method="active_set") -> SolveResult:
    if method == "active_set":
        return _active_set(p)
    if method == "interior":
        return _clarabel(p)
    raise ValueError(f"unknown QP method {method!r}")


def _dense(M):
    return M.toarray() if hasattr(M, "toarray") else np.asarray(M)


def _active_set(p):
    H = _dense(p.Hq)
    f = p.f
    A_ub, b_ub = _dense(p.A_ub), p.b_ub
    A_eq, b_eq = _dense(p.A_eq), p.b_eq
    n, m_ub, m_eq = p.n, b_ub.size, b_eq.size

    start = solve_lp(LpProblem(np.zeros(n), A_ub, b_ub, A_eq, b_eq))
    if start.status is Status.INFEASIBLE:
        return SolveResult(Status.INFEASIBLE, np.full(n, np.nan), np.zeros(m_ub),
                           float("nan"), np.zeros(m_eq))
    z = start.primal.copy()

    scale = max(1.0, np.abs(b_ub).max(initial=0.0), np.abs(b_eq).max(initial=0.0))
    feas_tol = TOL.lp_feasibility * scale

    # working set: all equalities plus a linearly independent subset of the active inequalities
    eq_rows = list(range(m_eq))
    working = []
    rank_rows = [A_eq[i] for i in eq_rows]
    rank = np.linalg.matrix_rank(np.array(rank_rows)) if rank_rows else 0
    for i in np.flatnonzero(A_ub @ z >= b_ub - feas_tol):
        trial = rank_rows + [A_ub[i]]
        r = np.linalg.matrix_rank(np.array(trial))
        if r > rank:
            rank_rows, rank = trial, r
            working.append(int(i))

    max_iter = 50 * (n + m_ub + m_eq + 1)
    lam_ub = np.zeros(m_ub)
    mu_eq = np.zeros(m_eq)
    for it in range(max_iter):
        Aw = np.vstack([A_eq, A_ub[working]]) if working else A_eq
        g = H @ z + f
        p_step, ray = _eqp_direction(H, Aw, g)
        if ray:
            step, blocking = _ratio_test(A_ub, b_ub, z, p_step, working, np.inf)
            if blocking is None:
                return SolveResult(Status.UNBOUNDED, z, lam_ub, float("-inf"), mu_eq, it)
            z = z + step * p_step
            working.append(blocking)
            continue
        if np.linalg.norm(p_step) <= TOL.qp_step * max(1.0, np.linalg.norm(z)):
            mult = _multipliers(Aw, g)
            mu = mult[:m_eq]
            lam_w = mult[m_eq:]
            if lam_w.size == 0 or lam_w.min() >= -TOL.qp_kkt * max(1.0, np.abs(g).max()):
                lam_ub = np.zeros(m_ub)
                lam_ub[working] = np.maximum(lam_w, 0.0)
                mu_eq = mu
                return SolveResult(Status.OPTIMAL, z, lam_ub, p.objective(z), mu_eq, it)
            working.pop(int(np.argmin(lam_w)))
            continue
        step, blocking = _ratio_test(A_ub, b_ub, z, p_step, working, 1.0)
        z = z + step * p_step
        if blocking is not None:
            working.append(blocking)
    raise NumericalFailure("active-set QP hit the iteration cap")


def _eqp_direction(H, Aw, g):
    """Step of the equality-constrained subproblem, or a descent ray when it is unbounded."""
    n = H.shape[0]
    k = Aw.shape[0]
    K = np.zeros((n + k, n + k))
    K[:n, :n] = H
    K[:n, n:] = Aw.T
    K[n:, :n] = Aw
    rhs = np.concatenate([-g, np.zeros(k)])
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    if np.linalg.norm(K @ sol - rhs) <= 1e-9 * max(1.0, np.linalg.norm(rhs)):
        return sol[:n], False
    # inconsistent KKT system: zero-curvature descent direction inside the working face
    _, s, Vt = np.linalg.svd(np.vstack([H, Aw]))
    null = Vt[np.sum(s > 1e-10 * max(1.0, s.max(initial=0.0))):].T
    d = -null @ (null.T @ g)
    return d, True


def _multipliers(Aw, g):
    if Aw.shape[0] == 0:
        return np.zeros(0)
    lam, *_ = np.linalg.lstsq(Aw.T, -g, rcond=None)
    return lam


def _ratio_test(A_ub, b_ub, z, d, working, cap):
    step, blocking = cap, None
    slope = A_ub @ d
    slack = b_ub - A_ub @ z
    wset = set(working)
    for i in np.flatnonzero(slope > 1e-14):
        if i in wset:
            continue
        t = max(slack[i], 0.0) / slope[i]
        if t < step:
            step, blocking = t, int(i)
    return step, blocking


_CLARABEL_STATUS = {
    "Solved": Status.OPTIMAL,
    "AlmostSolved": Status.OPTIMAL,
    "PrimalInfeasible": Status.INFEASIBLE,
    "AlmostPrimalInfeasible": Status.INFEASIBLE,
    "DualInfeasible": Status.UNBOUNDED,
    "AlmostDualInfeasible": Status.UNBOUNDED,
}


def _clarabel(p):
    import clarabel

    n = p.n
    P = sp.triu(sp.csc_matrix(p.Hq), format="csc")
    A = sp.vstack([sp.csc_matrix(p.A_eq), sp.csc_matrix(p.A_ub)], format="csc")
    b = np.concatenate([p.b_eq, p.b_ub])
    m_eq, m_ub = p.b_eq.size, p.b_ub.size
    cones = []
    if m_eq:
        cones.append(clarabel.ZeroConeT(m_eq))
    if m_ub:
        cones.append(clarabel.NonnegativeConeT(m_ub))
    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.tol_gap_abs = TOL.ipm_gap
    settings.tol_gap_rel = TOL.ipm_gap
    settings.tol_feas = TOL.ipm_feas
    settings.tol_ktratio = 1e-8
    settings.max_iter = 200
    solver = clarabel.DefaultSolver(P, p.f, A, b, cones, settings)
    sol = solver.solve()
    status = _CLARABEL_STATUS.get(str(sol.status).split(".")[-1], Status.MAX_ITER)
    if status is Status.MAX_ITER:
        raise NumericalFailure(f"interior-point QP failed: {sol.status}")
    x = np.asarray(sol.x, dtype=float)
    zdual = np.asarray(sol.z, dtype=float)
    if status is not Status.OPTIMAL:
        return SolveResult(status, np.full(n, np.nan), np.zeros(m_ub), float("nan"),
                           np.zeros(m_eq), int(sol.iterations))
    return SolveResult(Status.OPTIMAL, x, zdual[m_eq:], p.objective(x), zdual[:m_eq],
                       int(sol.iterations))


def require_optimal(res: SolveResult, what="program"):
    if res.status is Status.INFEASIBLE:
        raise InfeasibleError(f"{what} is infeasible")
    if res.status is not Status.OPTIMAL:
        raise NumericalFailure(f"{what}: solver returned {res.status.value}")
    return res

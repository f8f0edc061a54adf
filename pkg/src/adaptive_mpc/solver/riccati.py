import numpy as np

from ..errors import NoConvergence
from ..tolerances import TOL


def solve_dare(A, B, Q_lqr, R_lqr, tol=TOL.dare_tol, max_iter=TOL.dare_max_iter):
    """LQR gain and cost matrix from the discrete algebraic Riccati equation.

    Iterates ``P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA`` from ``P = Q`` until the
    update is below ``tol`` (relative to ``max(1, |P|)``).  The returned gain
    follows the ``u = K x`` convention, so the closed loop is ``A + B K``.

    Raises
    ------
    NoConvergence
        If the iteration diverges, hits ``max_iter``, or yields a non-stabilising gain
        (for instance when ``(A, B)`` is not stabilisable).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    Q = np.atleast_2d(np.asarray(Q_lqr, dtype=float))
    R = np.atleast_2d(np.asarray(R_lqr, dtype=float))

    P = Q.copy()
    for _ in range(max_iter):
        BtP = B.T @ P
        G = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = Q + A.T @ P @ A - (A.T @ P @ B) @ G
        P_next = 0.5 * (P_next + P_next.T)
        if not np.all(np.isfinite(P_next)) or np.abs(P_next).max() > 1e15:
            raise NoConvergence("Riccati iteration diverged; is (A, B) stabilisable?")
        done = np.abs(P_next - P).max() <= tol * max(1.0, np.abs(P_next).max())
        P = P_next
        if done:
            break
    else:
        raise NoConvergence(f"Riccati iteration did not converge in {max_iter} steps")

    K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    if np.max(np.abs(np.linalg.eigvals(A + B @ K))) >= 1.0:
        raise NoConvergence("Riccati fixed point does not stabilise A + BK")
    return K, P


def dare_residual(A, B, Q, R, P):
    A, B, Q, R, P = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, Q, R, P))
    B = B.reshape(A.shape[0], -1)
    rhs = Q + A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    return float(np.abs(rhs - P).max())

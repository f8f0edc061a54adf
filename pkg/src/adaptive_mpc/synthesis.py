"""Offline terminal ingredients: LQR gain, terminal cost and invariant terminal sets."""
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.linalg

from .adaptation import RateBounds, rate_bounds
from .errors import EmptySetError, EmptyTerminalSet, NoConvergence
from .geometry import Polytope, contains, is_empty, redundant_rows, remove_redundant, support
from .solver import solve_dare
from .system import Mode, SystemConfig
from .tolerances import TOL


class TerminalKind(str, Enum):
    ROBUST = "robust"
    STOCHASTIC = "stochastic"


@dataclass(frozen=True, eq=False)
class TerminalIngredients:
    K: np.ndarray
    P_f: np.ndarray
    X_term: Polytope
    kind: TerminalKind
    quantiles: np.ndarray = None
    rate: RateBounds = None


def closed_loop(sys: SystemConfig, K):
    return sys.A + sys.B @ np.atleast_2d(K)


def _disturbance_margin(sys, y):
    """``max w'y + max (E theta)'y`` over ``W`` and ``Omega``."""
    return sys.W.support(y) + support(sys.Omega, sys.E.T @ y)


def _invariant_subset(X0: Polytope, Acl, margin, max_iter=TOL.invariant_max_iter):
    """Largest subset of ``X0`` that ``x -> Acl x + d`` keeps invariant for every admissible ``d``.

    ``margin(y)`` is the support of the disturbance set in direction ``y``.
    Pre-set rows are generated only from rows that were added in the last
    sweep; the loop stops once none of the freshly generated rows cuts the set.
    """
    try:
        X = remove_redundant(X0)
    except EmptySetError as exc:
        raise EmptyTerminalSet("initial constraint set is empty") from exc
    front_H, front_h = X.H, X.h
    for _ in range(max_iter):
        new_H = front_H @ Acl
        new_h = np.array([hi - margin(yi) for yi, hi in zip(front_H, front_h)])
        cand = Polytope(np.vstack([X.H, new_H]), np.concatenate([X.h, new_h]))
        if is_empty(cand):
            raise EmptyTerminalSet("disturbance tightening leaves no invariant set")
        dropped = set(redundant_rows(cand, keep=range(X.rows)))
        fresh = [i for i in range(X.rows, cand.rows) if i not in dropped]
        if not fresh:
            return X
        X = remove_redundant(cand)
        front_H, front_h = cand.H[fresh], cand.h[fresh]
    raise NoConvergence(f"terminal set iteration did not converge in {max_iter} sweeps")


def _check_origin(X):
    if not contains(X, np.zeros(X.dim)):
        raise EmptyTerminalSet("terminal set does not contain the origin")
    return X


def robust_terminal_set(sys: SystemConfig, K) -> Polytope:
    """Maximal set invariant under ``u = Kx`` for all ``w`` in ``W`` and ``theta`` in ``Omega``."""
    K = np.atleast_2d(K)
    rc = sys.robust
    X0 = Polytope(rc.C + rc.D @ K, rc.b)
    X = _invariant_subset(X0, closed_loop(sys, K), lambda y: _disturbance_margin(sys, y))
    return _check_origin(X)


def stochastic_terminal_set(sys: SystemConfig, K, quantiles) -> Polytope:
    """Invariant set whose points meet the input rows and the quantile-tightened state rows."""
    K = np.atleast_2d(K)
    cc = sys.chance
    Acl = closed_loop(sys, K)
    q = np.asarray(quantiles, dtype=float).reshape(-1)
    theta_term = np.array([support(sys.Omega, sys.E.T @ g) for g in cc.G])
    X0 = Polytope(np.vstack([cc.H_u @ K, cc.G @ Acl]),
                  np.concatenate([cc.h_u, cc.h - theta_term - q]))
    X = _invariant_subset(X0, Acl, lambda y: _disturbance_margin(sys, y))
    return _check_origin(X)


def terminal_cost(sys: SystemConfig, K):
    """``P_f`` with ``Acl' P_f Acl - P_f = -(P + K'RK)`` for the stage weights."""
    K = np.atleast_2d(K)
    Acl = closed_loop(sys, K)
    P_f = scipy.linalg.solve_discrete_lyapunov(Acl.T, sys.P + K.T @ sys.R @ K)
    return 0.5 * (P_f + P_f.T)


def chance_quantiles(sys: SystemConfig, noise_model):
    from .controller.quantile import quantile_linear

    cc = sys.chance
    return np.array([quantile_linear(g, sys.W, noise_model, 1.0 - a).value
                     for g, a in zip(cc.G, cc.alpha_rows)])


def synthesize(sys: SystemConfig, noise_model=None) -> TerminalIngredients:
    """Gain from the LQR weights, terminal cost from the stage weights, mode-specific terminal set."""
    K, _ = solve_dare(sys.A, sys.B, sys.Q_lqr, sys.R_lqr)
    P_f = terminal_cost(sys, K)
    rb = rate_bounds(sys.P_rate, sys.E)
    if sys.mode is Mode.ROBUST:
        return TerminalIngredients(K, P_f, robust_terminal_set(sys, K), TerminalKind.ROBUST,
                                   None, rb)
    if noise_model is None:
        raise ValueError("stochastic synthesis needs a noise model for the quantiles")
    q = chance_quantiles(sys, noise_model)
    return TerminalIngredients(K, P_f, stochastic_terminal_set(sys, K, q),
                               TerminalKind.STOCHASTIC, q, rb)

"""Set-membership adaptation of the offset's feasible parameter set.

The feasible set is stored as ``{theta : H theta <= h}`` whose leading ``r0``
rows are the rows of ``Omega`` (kept verbatim).  Every later row comes from a
measurement and carries its own per-step inflation: ``-nu_lower_i`` for a
``-E_i`` row and ``nu_upper_i`` for a ``+E_i`` row.  Tracking the inflation
per row lets redundant measurement rows be pruned without changing how the
remaining offsets grow over the prediction horizon.
"""
from dataclasses import dataclass

import numpy as np

from .errors import EmptySetAfterUpdate
from .geometry import Polytope, contains, is_empty, redundant_rows, support
from .solver import QpProblem, require_optimal, solve_qp


@dataclass(frozen=True)
class RateBounds:
    nu_lower: np.ndarray
    nu_upper: np.ndarray


@dataclass(frozen=True)
class FeasibleParameterSet:
    theta_set: Polytope
    t: int
    r0: int
    inflation: np.ndarray

    @classmethod
    def initial(cls, Omega: Polytope):
        return cls(Omega, 0, Omega.rows, np.zeros(Omega.rows))

    @property
    def H(self):
        return self.theta_set.H

    @property
    def h(self):
        return self.theta_set.h


@dataclass(frozen=True)
class PredictedFpsSequence:
    """``sets[i]`` is the predicted set for time ``t + i``, ``i = 0..N``; ``sets[N]`` is Omega."""

    sets: tuple

    def __len__(self):
        return len(self.sets)

    def __getitem__(self, i):
        return self.sets[i]


@dataclass(frozen=True)
class LmsEstimate:
    theta_bar: np.ndarray
    mu: float


def rate_bounds(P_rate: Polytope, E) -> RateBounds:
    """Componentwise extremes of ``E nu`` over ``nu`` in the rate set (``2 n`` LPs)."""
    E = np.atleast_2d(np.asarray(E, dtype=float))
    lo = np.array([-support(P_rate, -row) for row in E])
    up = np.array([support(P_rate, row) for row in E])
    return RateBounds(lo + 0.0, up + 0.0)


def _measurement_rows(E, resid, w_lower, w_upper, rb):
    # E theta_{t} = resid - w_t  and  theta_{t+1} - theta_t in P_rate
    H_new = np.vstack([-E, E])
    h_new = np.concatenate([-resid + w_upper - rb.nu_lower, resid - w_lower + rb.nu_upper])
    infl = np.concatenate([-rb.nu_lower, rb.nu_upper])
    return H_new, h_new, infl


def _prune(H, h, infl, r0):
    """Drop measurement rows that stay redundant under any amount of inflation.

    Redundancy is decided for the lifted set ``{(theta, s) : H theta - s*infl <= h, s >= 0}``
    so a row that is dropped now could never have become active at a later
    prediction step either.
    """
    rows, p = H.shape
    lifted = Polytope(
        np.vstack([np.hstack([H, -infl[:, None]]), np.hstack([np.zeros((1, p)), [[-1.0]]])]),
        np.concatenate([h, [0.0]]),
    )
    keep = list(range(r0)) + [rows]
    dropped = set(redundant_rows(lifted, keep=keep))
    idx = [i for i in range(rows) if i not in dropped]
    return H[idx], h[idx], infl[idx]


def fps_update(fps: FeasibleParameterSet, x_prev, u_prev, x_now, sys, rb: RateBounds,
               prune=True) -> FeasibleParameterSet:
    """Feasible set for ``theta_{t+1}`` given the transition ``(x_t, u_t) -> x_{t+1}``.

    Raises
    ------
    EmptySetAfterUpdate
        The measurement is inconsistent with the noise and rate bounds.
    """
    x_prev = np.asarray(x_prev, dtype=float).reshape(-1)
    u_prev = np.asarray(u_prev, dtype=float).reshape(-1)
    x_now = np.asarray(x_now, dtype=float).reshape(-1)
    resid = x_now - sys.A @ x_prev - sys.B @ u_prev
    H_new, h_new, infl_new = _measurement_rows(sys.E, resid, sys.W.lower, sys.W.upper, rb)

    H = np.vstack([fps.H, H_new])
    h = np.concatenate([fps.h + fps.inflation, h_new])
    infl = np.concatenate([fps.inflation, infl_new])
    if is_empty(Polytope(H, h)):
        raise EmptySetAfterUpdate(
            f"feasible parameter set empty at t={fps.t + 1}; noise or rate bounds violated")
    if prune:
        H, h, infl = _prune(H, h, infl, fps.r0)
    return FeasibleParameterSet(Polytope(H, h), fps.t + 1, fps.r0, infl)


def fps_predict(fps: FeasibleParameterSet, N: int, rb: RateBounds, Omega: Polytope):
    """Predicted sets over the horizon; the last one is ``Omega`` itself."""
    if N < 1:
        raise ValueError("horizon must be >= 1")
    sets = [fps.theta_set]
    for k in range(1, N):
        sets.append(Polytope(fps.H, fps.h + k * fps.inflation))
    sets.append(Omega)
    return PredictedFpsSequence(tuple(sets))


def project(Omega: Polytope, theta):
    """Euclidean projection onto ``Omega``."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if contains(Omega, theta, tol=0.0):
        return theta.copy()
    res = solve_qp(QpProblem(np.eye(theta.size), -theta, Omega.H, Omega.h))
    return require_optimal(res, "projection").primal


def lms_update(est: LmsEstimate, x_now, xbar_pred, E, Omega: Polytope) -> LmsEstimate:
    """Least-mean-square offset estimate followed by projection onto ``Omega``."""
    E = np.atleast_2d(np.asarray(E, dtype=float))
    if est.mu * np.linalg.norm(E, 2) ** 2 >= 1.0:
        raise ValueError("LMS gain must satisfy mu * ||E||^2 < 1")
    innov = np.asarray(x_now, dtype=float).reshape(-1) - np.asarray(xbar_pred, dtype=float).reshape(-1)
    theta_tilde = est.theta_bar + est.mu * E.T @ innov
    return LmsEstimate(project(Omega, theta_tilde), est.mu)


def prediction_error_ratio(xtilde_hist, w_hist, theta_bar0, theta_a0, mu) -> float:
    """Accumulated one-step prediction error over the LMS energy bound (at most 1)."""
    xt = np.atleast_2d(np.asarray(xtilde_hist, dtype=float))
    w = np.atleast_2d(np.asarray(w_hist, dtype=float))
    num = float(np.sum(xt ** 2))
    e0 = np.asarray(theta_bar0, dtype=float) - np.asarray(theta_a0, dtype=float)
    den = float(e0 @ e0) / mu + float(np.sum(w ** 2))
    if den == 0.0:
        if num == 0.0:
            return 0.0
        raise ZeroDivisionError("zero noise energy and exact initial estimate")
    return num / den

"""Numerical tolerances shared by every module.

Kept in one frozen record so that solver termination, containment tests and
fixed-point stopping rules stay mutually consistent.
"""
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # simplex
    lp_pivot: float = 1e-10
    lp_optimality: float = 1e-10
    lp_feasibility: float = 1e-9
    # active-set QP
    qp_kkt: float = 1e-10
    qp_step: float = 1e-12
    # interior-point backend (large controller programs)
    ipm_gap: float = 1e-10
    ipm_feas: float = 1e-10
    # sets
    containment: float = 1e-9
    redundancy: float = 1e-9
    # Riccati fixed point
    dare_tol: float = 1e-12
    dare_max_iter: int = 10_000
    # invariant-set iteration
    invariant_max_iter: int = 200
    invariant_support: float = 1e-8


TOL = Tolerances()

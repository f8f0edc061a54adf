"""One receding-horizon step: predict offset sets, assemble, solve, return the first input."""
from dataclasses import dataclass

import numpy as np

from ..adaptation import fps_predict
from ..errors import InfeasibleStep
from ..solver import Status, solve_qp
from .model import build_stacked_model
from .program import UncertaintyStack, assemble_program

ACTIVE_TOL = 1e-7


@dataclass(eq=False)
class MpcDiagnostics:
    status: Status
    iterations: int
    M: np.ndarray
    v: np.ndarray
    row_bounds: np.ndarray
    row_slack: np.ndarray
    active_rows: int
    program: object

    @property
    def model(self):
        return self.program.model

    @property
    def stack(self):
        return self.program.stack


def mpc_step(sys, x_t, fps, terminal, theta_bar=None, t=None):
    """Solve the policy program at ``x_t`` and return ``(u_t, J*, diagnostics)``.

    ``theta_bar`` shifts the nominal prediction used in the cost (LMS mode);
    by default the nominal offset is zero.

    Raises
    ------
    InfeasibleStep
        The program has no feasible policy at ``x_t``.
    """
    x_t = np.asarray(x_t, dtype=float).reshape(-1)
    N = int(sys.N)
    seq = fps_predict(fps, N, terminal.rate, sys.Omega)
    sm = build_stacked_model(sys, x_t, terminal, terminal.quantiles)
    us = UncertaintyStack.from_sets(sys.W, seq.sets[:N], sys.E)
    prog = assemble_program(sm, us, sys, x_t, theta_bar)
    res = solve_qp(prog.qp, method="interior")
    if res.status is not Status.OPTIMAL:
        raise InfeasibleStep(f"policy program {res.status.value} at t={t}", t=t, status=res.status)
    M, v, bounds = prog.decode(res.primal)
    rhs = sm.c + sm.H @ x_t
    slack = rhs - sm.F @ v - bounds
    diag = MpcDiagnostics(res.status, res.iterations, M, v, bounds, slack,
                          int(np.sum(slack <= ACTIVE_TOL)), prog)
    return v[: sys.m].copy(), float(res.objective), diag

"""Dense LP/QP solvers and the Riccati solver."""
from .lp import solve_lp
from .qp import require_optimal, solve_qp
from .riccati import dare_residual, solve_dare
from .types import LpProblem, QpProblem, SolveResult, Status

__all__ = [
    "LpProblem",
    "QpProblem",
    "SolveResult",
    "Status",
    "dare_residual",
    "require_optimal",
    "solve_dare",
    "solve_lp",
    "solve_qp",
]

"""Affine disturbance-feedback MPC with dualised worst-case constraints."""
from .model import StackedModel, build_stacked_model, prediction_matrices
from .mpc import MpcDiagnostics, mpc_step
from .program import PolicyProgram, UncertaintyStack, assemble_program, cost_terms, dual_row_bounds
from .quantile import QuantileEstimate, quantile_linear

__all__ = [
    "MpcDiagnostics",
    "PolicyProgram",
    "QuantileEstimate",
    "StackedModel",
    "UncertaintyStack",
    "assemble_program",
    "build_stacked_model",
    "cost_terms",
    "dual_row_bounds",
    "mpc_step",
    "prediction_matrices",
    "quantile_linear",
]

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    MAX_ITER = "MaxIter"


def _as_matrix(M, ncols):
    if M is None:
        return np.zeros((0, ncols))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return np.zeros((0, ncols))
    return M


def _as_vector(v, n):
    if v is None:
        return np.zeros(n)
    return np.asarray(v, dtype=float).reshape(-1)


@dataclass
class LpProblem:
    """``min c'z  s.t.  A_ub z <= b_ub,  A_eq z = b_eq`` with ``z`` free."""

    c: np.ndarray
    A_ub: np.ndarray = None
    b_ub: np.ndarray = None
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).reshape(-1)
        n = self.c.size
        self.A_ub = _as_matrix(self.A_ub, n)
        self.A_eq = _as_matrix(self.A_eq, n)
        self.b_ub = _as_vector(self.b_ub, self.A_ub.shape[0])
        self.b_eq = _as_vector(self.b_eq, self.A_eq.shape[0])
        _check_shapes(n, self.A_ub, self.b_ub, self.A_eq, self.b_eq)

    @property
    def n(self):
        return self.c.size


@dataclass
class QpProblem:
    """``min 1/2 z'Hq z + f'z`` over the same constraint format as :class:`LpProblem`.

    ``Hq``/``A_ub``/``A_eq`` may be scipy sparse matrices when the problem is
    handed to the interior-point backend.
    """

    Hq: object
    f: np.ndarray
    A_ub: object = None
    b_ub: np.ndarray = None
    A_eq: object = None
    b_eq: np.ndarray = None
    constant: float = 0.0

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float).reshape(-1)
        n = self.f.size
        if not _is_sparse(self.Hq):
            self.Hq = np.atleast_2d(np.asarray(self.Hq, dtype=float))
            if self.Hq.shape != (n, n):
                raise ValueError(f"Hq must be {n}x{n}, got {self.Hq.shape}")
            if not np.allclose(self.Hq, self.Hq.T, atol=1e-10, rtol=0):
                raise ValueError("Hq must be symmetric")
        if not _is_sparse(self.A_ub):
            self.A_ub = _as_matrix(self.A_ub, n)
        if not _is_sparse(self.A_eq):
            self.A_eq = _as_matrix(self.A_eq, n)
        self.b_ub = _as_vector(self.b_ub, self.A_ub.shape[0])
        self.b_eq = _as_vector(self.b_eq, self.A_eq.shape[0])
        _check_shapes(n, self.A_ub, self.b_ub, self.A_eq, self.b_eq)

    @property
    def n(self):
        return self.f.size

    def objective(self, z):
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ (self.Hq @ z) + self.f @ z + self.constant)


def _is_sparse(M):
    return hasattr(M, "tocsc")


def _check_shapes(n, A_ub, b_ub, A_eq, b_eq):
    if A_ub.shape[1] != n or A_eq.shape[1] != n:
        raise ValueError("constraint column counts must match the cost vector")
    if A_ub.shape[0] != b_ub.size or A_eq.shape[0] != b_eq.size:
        raise ValueError("constraint row counts must match right-hand sides")
    for name, M in (("A_ub", A_ub), ("A_eq", A_eq)):
        data = M.data if _is_sparse(M) else M
        if not np.all(np.isfinite(data)):
            raise ValueError(f"{name} has non-finite entries")


@dataclass
class SolveResult:
    status: Status
    primal: np.ndarray
    dual_ub: np.ndarray
    objective: float
    dual_eq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0

    @property
    def optimal(self):
        return self.status is Status.OPTIMAL

"""Plant, constraint and cost data shared by synthesis, control and simulation."""
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .geometry import BoxSet, Polytope, contains, is_bounded, is_empty


class Mode(str, Enum):
    ROBUST = "robust"
    STOCHASTIC = "stochastic"


@dataclass(frozen=True)
class RobustConstraints:
    """Hard mixed constraints ``C x + D u <= b``."""

    C: np.ndarray
    D: np.ndarray
    b: np.ndarray


@dataclass(frozen=True)
class ChanceConstraints:
    """Rows ``P(g_j' x <= h_j) >= 1 - alpha_j`` plus hard inputs ``H_u u <= h_u``."""

    G: np.ndarray
    h: np.ndarray
    alpha: float
    alpha_rows: np.ndarray
    H_u: np.ndarray
    h_u: np.ndarray


def _mat(M, rows=None):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if rows is not None and M.shape[0] != rows:
        M = M.reshape(rows, -1)
    return M


def _vec(v):
    return np.asarray(v, dtype=float).reshape(-1)


@dataclass(frozen=True, eq=False)
class SystemConfig:
    A: np.ndarray
    B: np.ndarray
    E: np.ndarray
    W: BoxSet
    Omega: Polytope
    P_rate: Polytope
    P: np.ndarray
    R: np.ndarray
    N: int
    mode: Mode = Mode.ROBUST
    robust: Optional[RobustConstraints] = None
    chance: Optional[ChanceConstraints] = None
    Q_lqr: Optional[np.ndarray] = None
    R_lqr: Optional[np.ndarray] = None

    def __post_init__(self):
        A = _mat(self.A)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", _mat(self.B, A.shape[0]))
        object.__setattr__(self, "E", _mat(self.E, A.shape[0]))
        object.__setattr__(self, "P", _mat(self.P))
        object.__setattr__(self, "R", _mat(self.R))
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "Q_lqr", self.P if self.Q_lqr is None else _mat(self.Q_lqr))
        object.__setattr__(self, "R_lqr", self.R if self.R_lqr is None else _mat(self.R_lqr))
        if self.robust is not None:
            r = self.robust
            b = _vec(r.b)
            object.__setattr__(self, "robust", RobustConstraints(
                _mat(r.C, b.size), _mat(r.D, b.size), b))
        if self.chance is not None:
            c = self.chance
            h = _vec(c.h)
            hu = _vec(c.h_u)
            object.__setattr__(self, "chance", ChanceConstraints(
                _mat(c.G, h.size), h, float(c.alpha), _vec(c.alpha_rows),
                _mat(c.H_u, hu.size), hu))
        problems = self.validate()
        if problems:
            from .errors import ValidationError
            raise ValidationError(problems)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.E.shape[1]

    @property
    def w_bar(self):
        return self.W.upper

    def validate(self):
        """List of ``(field, message)`` pairs for every violated invariant."""
        out = []
        n, m, p = self.n, self.m, self.p
        if self.A.shape != (n, n):
            out.append(("A", "must be square"))
        if self.E.shape[0] != n:
            out.append(("E", f"must have {n} rows"))
        if self.W.dim != n:
            out.append(("W", f"noise box must have dimension {n}"))
        elif not (np.all(self.W.lower <= 0) and np.all(self.W.upper >= 0)):
            out.append(("W", "noise box must contain zero"))
        if self.Omega.dim != p:
            out.append(("Omega", f"offset set must have dimension {p}"))
        elif is_empty(self.Omega) or not is_bounded(self.Omega):
            out.append(("Omega", "offset set must be nonempty and bounded"))
        elif not contains(self.Omega, np.zeros(p)):
            out.append(("Omega", "offset set must contain the origin"))
        if self.P_rate.dim != p:
            out.append(("P_rate", f"rate set must have dimension {p}"))
        elif is_empty(self.P_rate) or not is_bounded(self.P_rate):
            out.append(("P_rate", "rate set must be nonempty and bounded"))
        elif not contains(self.P_rate, np.zeros(p)):
            out.append(("P_rate", "rate set must contain the origin"))
        if self.P.shape != (n, n) or np.any(np.linalg.eigvalsh(0.5 * (self.P + self.P.T)) < -1e-12):
            out.append(("cost.P", f"must be a {n}x{n} positive semidefinite matrix"))
        if self.R.shape != (m, m) or np.any(np.linalg.eigvalsh(0.5 * (self.R + self.R.T)) <= 0):
            out.append(("cost.R", f"must be a {m}x{m} positive definite matrix"))
        if int(self.N) < 1:
            out.append(("horizon", "must be >= 1"))
        if self.mode is Mode.ROBUST:
            if self.robust is None:
                out.append(("constraints.robust", "required in robust mode"))
            else:
                r = self.robust
                if r.C.shape[1] != n:
                    out.append(("constraints.robust.C", f"must have {n} columns"))
                if r.D.shape[1] != m:
                    out.append(("constraints.robust.D", f"must have {m} columns"))
                if np.any(r.b < 0):
                    out.append(("constraints.robust.b", "constraint set must contain the origin"))
        if self.mode is Mode.STOCHASTIC:
            if self.chance is None:
                out.append(("constraints.stochastic", "required in stochastic mode"))
            else:
                out.extend(_validate_chance(self.chance, n, m))
        return out


def alpha_groups(G):
    """Pair rows with opposite normals: one two-sided constraint shares one risk budget."""
    groups, used = [], set()
    for i in range(G.shape[0]):
        if i in used:
            continue
        group = [i]
        used.add(i)
        for j in range(i + 1, G.shape[0]):
            if j not in used and np.allclose(G[j], -G[i]):
                group.append(j)
                used.add(j)
                break
        groups.append(group)
    return groups


def _validate_chance(c, n, m):
    out = []
    if c.G.shape[1] != n:
        out.append(("constraints.stochastic.G", f"must have {n} columns"))
    if c.H_u.shape[1] != m:
        out.append(("constraints.stochastic.H_u", f"must have {m} columns"))
    if c.alpha_rows.size != c.h.size:
        out.append(("constraints.stochastic.alpha_rows", "needs one entry per row of G"))
        return out
    if np.any(c.alpha_rows <= 0) or np.any(c.alpha_rows >= 1):
        out.append(("constraints.stochastic.alpha_rows", "each alpha_j must lie in (0, 1)"))
    if not 0 < c.alpha < 1:
        out.append(("constraints.stochastic.alpha", "must lie in (0, 1)"))
    budget = 0.0
    for group in alpha_groups(c.G):
        vals = c.alpha_rows[group]
        if not np.allclose(vals, vals[0]):
            out.append(("constraints.stochastic.alpha_rows",
                        f"rows {group} form one two-sided constraint and need equal alpha_j"))
        budget += vals[0]
    if abs(budget - c.alpha) > 1e-9:
        out.append(("constraints.stochastic.alpha / alpha_rows",
                    f"risk split sums to {budget:g}, expected alpha = {c.alpha:g}"))
    if np.any(c.h < 0) or np.any(c.h_u < 0):
        out.append(("constraints.stochastic", "constraint sets must contain the origin"))
    return out

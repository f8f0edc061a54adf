"""H-representation polytopes and the LP-backed operations on them."""
from dataclasses import dataclass
import math

import numpy as np

from .errors import DimUnsupportedError, EmptySetError, UnboundedError
from .solver import LpProblem, Status, solve_lp
from .tolerances import TOL


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Polytope:
    """The set ``{z : H z <= h}``.  Arrays are read-only once constructed."""

    H: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        h = np.asarray(self.h, dtype=float).reshape(-1)
        if H.shape[0] != h.size:
            raise ValueError(f"H has {H.shape[0]} rows but h has {h.size} entries")
        if H.shape[1] < 1 or H.shape[0] < 1:
            raise ValueError("a polytope needs dim >= 1 and at least one row")
        object.__setattr__(self, "H", _frozen(H))
        object.__setattr__(self, "h", _frozen(h))

    @property
    def dim(self):
        return self.H.shape[1]

    @property
    def rows(self):
        return self.H.shape[0]

    @classmethod
    def from_box(cls, lower, upper):
        lower = np.asarray(lower, dtype=float).reshape(-1)
        upper = np.asarray(upper, dtype=float).reshape(-1)
        eye = np.eye(lower.size)
        return cls(np.vstack([eye, -eye]), np.concatenate([upper, -lower]))

    def __repr__(self):
        return f"Polytope(dim={self.dim}, rows={self.rows})"


@dataclass(frozen=True, eq=False)
class BoxSet:
    """Axis-aligned box ``{z : lower <= z <= upper}``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float).reshape(-1)
        up = np.asarray(self.upper, dtype=float).reshape(-1)
        if lo.shape != up.shape:
            raise ValueError("box bounds must have equal length")
        if np.any(lo > up):
            raise ValueError("box lower bound exceeds upper bound")
        object.__setattr__(self, "lower", _frozen(lo))
        object.__setattr__(self, "upper", _frozen(up))

    @classmethod
    def symmetric(cls, bound):
        bound = np.asarray(bound, dtype=float).reshape(-1)
        return cls(-bound, bound)

    @property
    def dim(self):
        return self.lower.size

    def to_polytope(self):
        return Polytope.from_box(self.lower, self.upper)

    def support(self, c):
        c = np.asarray(c, dtype=float)
        return float(np.where(c > 0, c * self.upper, c * self.lower).sum())

    def vertices(self):
        corners = np.array(np.meshgrid(*zip(self.lower, self.upper), indexing="ij"))
        return corners.reshape(self.dim, -1).T


def _normalised(P):
    norms = np.linalg.norm(P.H, axis=1)
    norms[norms == 0] = 1.0
    return P.H / norms[:, None], P.h / norms


def support(P: Polytope, c) -> float:
    """``max c'z`` over ``P``; ``math.inf`` when unbounded in direction ``c``."""
    c = np.asarray(c, dtype=float).reshape(-1)
    if c.size != P.dim:
        raise ValueError("direction dimension does not match the polytope")
    H, h = _normalised(P)
    res = solve_lp(LpProblem(-c, H, h))
    if res.status is Status.INFEASIBLE:
        raise EmptySetError("support of an empty polytope")
    if res.status is Status.UNBOUNDED:
        return math.inf
    return -res.objective


def support_argmax(P: Polytope, c):
    """Maximiser returned alongside :func:`support` (``None`` when unbounded)."""
    c = np.asarray(c, dtype=float).reshape(-1)
    H, h = _normalised(P)
    res = solve_lp(LpProblem(-c, H, h))
    if res.status is Status.INFEASIBLE:
        raise EmptySetError("support of an empty polytope")
    if res.status is Status.UNBOUNDED:
        return math.inf, None
    return -res.objective, res.primal


def is_empty(P: Polytope) -> bool:
    H, h = _normalised(P)
    return solve_lp(LpProblem(np.zeros(P.dim), H, h)).status is Status.INFEASIBLE


def contains(P: Polytope, z, tol=TOL.containment) -> bool:
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size != P.dim:
        raise ValueError("point dimension does not match the polytope")
    return bool(np.all(P.H @ z <= P.h + tol))


def intersect_rows(P: Polytope, H_new, h_new) -> Polytope:
    H_new = np.asarray(H_new, dtype=float).reshape(-1, P.dim)
    h_new = np.asarray(h_new, dtype=float).reshape(-1)
    if H_new.shape[0] == 0:
        return P
    return Polytope(np.vstack([P.H, H_new]), np.concatenate([P.h, h_new]))


def intersect(P: Polytope, Q: Polytope) -> Polytope:
    return intersect_rows(P, Q.H, Q.h)


def _far_rows(H, h, keep):
    """Rows lying beyond a bounding box of the set, found without LPs on those rows.

    Offsets can span many orders of magnitude (e.g. rows ``C A^k`` of a
    contracting map after normalisation), and a huge right-hand side ruins the
    precision of the simplex basis solves.  The box comes from the bounded
    prefix of rows with the smallest offsets, so it never involves them.
    """
    rows, dim = H.shape
    order = np.argsort(h, kind="stable")
    k = min(rows, 2 * dim + 2)
    while True:
        sub = order[:k]
        lo, up = np.empty(dim), np.empty(dim)
        bounded = True
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = 1.0
            r_up = solve_lp(LpProblem(-e, H[sub], h[sub]))
            r_lo = solve_lp(LpProblem(e, H[sub], h[sub]))
            if Status.INFEASIBLE in (r_up.status, r_lo.status):
                raise EmptySetError("cannot remove redundancy from an empty polytope")
            if Status.UNBOUNDED in (r_up.status, r_lo.status):
                bounded = False
                break
            up[j], lo[j] = -r_up.objective, r_lo.objective
        if bounded or k == rows:
            break
        k = min(rows, 2 * k)
    if not bounded:
        return []
    reach = np.where(H > 0, H * up, H * lo).sum(axis=1)
    margin = TOL.redundancy + 1e-9 * np.maximum(np.abs(lo).max(), np.abs(up).max())
    return [int(i) for i in order[k:] if i not in keep and reach[i] < h[i] - margin]


def redundant_rows(P: Polytope, keep=()):
    """Indices of rows that can be dropped one after another without changing ``P``.

    Row ``i`` is redundant when maximising ``H_i z`` over the remaining rows stays
    below ``h_i`` (within the redundancy tolerance).  Rows listed in ``keep`` are
    never dropped but still participate as constraints.
    """
    H, h = _normalised(P)
    keep = set(int(k) for k in keep)
    active = np.ones(P.rows, bool)
    far = set(_far_rows(H, h, keep))
    active[list(far)] = False
    dropped = []
    for i in range(P.rows):
        if i in keep:
            continue
        if i in far:
            dropped.append(i)
            continue
        if not np.any(H[i]):
            if h[i] >= -TOL.redundancy:
                active[i] = False
                dropped.append(i)
            continue
        others = active.copy()
        others[i] = False
        # cap the row itself one unit above its offset so the LP stays bounded
        A = np.vstack([H[others], H[i]])
        b = np.concatenate([h[others], [h[i] + 1.0]])
        res = solve_lp(LpProblem(-H[i], A, b))
        if res.status is Status.INFEASIBLE:
            raise EmptySetError("cannot remove redundancy from an empty polytope")
        if res.status is Status.OPTIMAL and -res.objective <= h[i] + TOL.redundancy:
            active[i] = False
            dropped.append(i)
    return dropped


def remove_redundant(P: Polytope, keep=()) -> Polytope:
    """Minimal H-representation of ``P`` (rows in ``keep`` are retained verbatim)."""
    if is_empty(P):
        raise EmptySetError("cannot remove redundancy from an empty polytope")
    dropped = set(redundant_rows(P, keep))
    idx = [i for i in range(P.rows) if i not in dropped]
    return Polytope(P.H[idx], P.h[idx])


def is_bounded(P: Polytope) -> bool:
    for c in np.vstack([np.eye(P.dim), -np.eye(P.dim)]):
        if math.isinf(support(P, c)):
            return False
    return True


def vertices_2d(P: Polytope, tol=1e-9):
    """Counter-clockwise extreme points of a bounded, nonempty planar polytope."""
    if P.dim != 2:
        raise DimUnsupportedError("vertex enumeration is implemented for dim = 2 only")
    if is_empty(P):
        raise EmptySetError("empty polytope has no vertices")
    if not is_bounded(P):
        raise UnboundedError("unbounded polytope")
    H, h = _normalised(P)
    order = np.argsort(np.arctan2(H[:, 1], H[:, 0]), kind="stable")
    H, h = H[order], h[order]
    pts = []
    r = H.shape[0]
    for i in range(r):
        for j in range(i + 1, r):
            M = H[[i, j]]
            det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
            if abs(det) < 1e-12:
                continue
            z = np.linalg.solve(M, h[[i, j]])
            if np.all(H @ z <= h + tol):
                pts.append(z)
    pts = np.array(pts)
    uniq = []
    for z in pts:
        if not any(np.linalg.norm(z - u) <= 1e-8 for u in uniq):
            uniq.append(z)
    pts = np.array(uniq)
    if len(pts) == 1:
        return pts
    centre = pts.mean(axis=0)
    ang = np.arctan2(pts[:, 1] - centre[1], pts[:, 0] - centre[0])
    pts = pts[np.argsort(ang, kind="stable")]
    # drop points lying on an edge between two neighbours (degenerate intersections)
    keep = []
    for k in range(len(pts)):
        a, b, c = pts[k - 1], pts[k], pts[(k + 1) % len(pts)]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if len(pts) <= 2 or abs(cross) > 1e-12:
            keep.append(b)
    return np.array(keep)


def compass_directions(dim, count=16):
    """Fixed probe directions: evenly spaced angles in 2-D, signed axes and diagonals otherwise."""
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        ang = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(ang), np.sin(ang)])
    eye = np.eye(dim)
    diag = np.array(np.meshgrid(*[[-1.0, 1.0]] * min(dim, 4), indexing="ij")).reshape(min(dim, 4), -1).T
    diag_full = np.zeros((diag.shape[0], dim))
    diag_full[:, : diag.shape[1]] = diag / np.sqrt(diag.shape[1])
    return np.vstack([eye, -eye, diag_full])


def support_many(P: Polytope, directions):
    """Support values in many directions; exact vertex evaluation in 2-D, LPs otherwise."""
    directions = np.atleast_2d(directions)
    if P.dim == 2:
        try:
            V = vertices_2d(P)
        except UnboundedError:
            pass
        else:
            return (directions @ V.T).max(axis=1)
    return np.array([support(P, c) for c in directions])


def scale(P: Polytope, factor: float, centre=None) -> Polytope:
    """Homothety about ``centre`` (origin by default)."""
    centre = np.zeros(P.dim) if centre is None else np.asarray(centre, dtype=float)
    return Polytope(P.H, factor * (P.h - P.H @ centre) + P.H @ centre)

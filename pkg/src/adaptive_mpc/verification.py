"""Brute-force oracles for tests and the ``verify`` command.

Nothing here reuses the LP machinery: vertices come from clipping a large
square by each halfplane in turn, quantiles from sorted samples.
"""
from dataclasses import dataclass
import math

import numpy as np

from .errors import DimUnsupportedError, EmptySetError, UnboundedError
from .geometry import Polytope

_BIG = 1e6


@dataclass(frozen=True)
class OracleReport:
    max_violation: float
    witness: np.ndarray
    samples_or_vertices: int

    def passed(self, tol=1e-8):
        return self.max_violation <= tol

    def to_dict(self):
        return {"max_violation": self.max_violation,
                "witness": None if self.witness is None else self.witness.tolist(),
                "samples_or_vertices": self.samples_or_vertices}


def _clip(poly, a, b):
    """Sutherland-Hodgman step: keep the part of ``poly`` with ``a'z <= b``."""
    out = []
    k = len(poly)
    for i in range(k):
        p, q = poly[i], poly[(i + 1) % k]
        fp, fq = a @ p - b, a @ q - b
        if fp <= 0:
            out.append(p)
        if (fp < 0 < fq) or (fq < 0 < fp):
            s = fp / (fp - fq)
            out.append(p + s * (q - p))
    return out


def polygon_vertices(P: Polytope, tol=1e-10):
    """Extreme points of a bounded polytope of dimension 1 or 2."""
    H, h = np.asarray(P.H), np.asarray(P.h)
    if P.dim == 1:
        lo, up = -math.inf, math.inf
        for a, b in zip(H[:, 0], h):
            if a > 0:
                up = min(up, b / a)
            elif a < 0:
                lo = max(lo, b / a)
            elif b < -tol:
                raise EmptySetError("empty interval")
        if not (math.isfinite(lo) and math.isfinite(up)):
            raise UnboundedError("unbounded interval")
        if lo > up + tol:
            raise EmptySetError("empty interval")
        return np.array([[lo], [up]]) if up - lo > tol else np.array([[0.5 * (lo + up)]])
    if P.dim != 2:
        raise DimUnsupportedError("vertex oracle handles blocks of dimension 1 or 2")
    poly = [np.array(v, dtype=float) for v in ((-_BIG, -_BIG), (_BIG, -_BIG), (_BIG, _BIG), (-_BIG, _BIG))]
    for a, b in zip(H, h):
        norm = np.linalg.norm(a)
        if norm == 0:
            if b < -tol:
                raise EmptySetError("infeasible zero row")
            continue
        poly = _clip(poly, a / norm, b / norm + tol)
        if not poly:
            raise EmptySetError("polygon clipped to nothing")
    pts = np.array(poly)
    if np.abs(pts).max() >= 0.5 * _BIG:
        raise UnboundedError("polygon reaches the clipping frame")
    return pts


def robustify_by_vertices(row, blocks) -> float:
    """Exact ``max row'xi`` over a product of small polytopes.

    ``blocks`` is a sequence of Polytopes whose dimensions partition ``row``
    (a single Polytope counts as one block).  The maximum is separable, so each
    block is enumerated on its own and the block maxima are added.
    """
    if isinstance(blocks, Polytope):
        blocks = [blocks]
    row = np.asarray(row, dtype=float).reshape(-1)
    if sum(b.dim for b in blocks) != row.size:
        raise ValueError("row length does not match the block dimensions")
    total, start = 0.0, 0
    for blk in blocks:
        c = row[start:start + blk.dim]
        start += blk.dim
        if not np.any(c):
            continue
        total += float(np.max(polygon_vertices(blk) @ c))
    return total


def empirical_quantile(g, noise_model, level, n_samples, seed, n_boot=200):
    """Order-statistic quantile of ``g'w`` with a bootstrap standard error."""
    if n_samples < 10**4:
        raise ValueError("use at least 10^4 samples")
    rng = np.random.default_rng(seed)
    lo, up = noise_model.bounds.lower, noise_model.bounds.upper
    w = lo + rng.random((n_samples, lo.size)) * (up - lo)
    s = np.sort(w @ np.asarray(g, dtype=float))
    idx = max(int(math.ceil(level * n_samples)) - 1, 0)
    est = float(s[idx])
    boot = np.empty(n_boot)
    for b in range(n_boot):
        pick = np.sort(s[rng.integers(0, n_samples, n_samples)])
        boot[b] = pick[idx]
    return est, float(boot.std(ddof=1))


def _points(S):
    if isinstance(S, Polytope):
        return polygon_vertices(S)
    if hasattr(S, "vertices"):
        return S.vertices()
    return np.atleast_2d(np.asarray(S, dtype=float))


def check_invariance_sampled(X: Polytope, Acl, W, EOmega, n_samples=1000, seed=0) -> OracleReport:
    """Worst containment residual of ``Acl x + w + d`` over ``x`` in ``X``, ``w`` in ``W``, ``d`` in ``E Omega``.

    All vertex triples are stepped, then ``n_samples`` random convex
    combinations.  ``EOmega`` may be a Polytope or an array of its vertices.
    """
    VX, VW, VD = _points(X), _points(W), _points(EOmega)
    Acl = np.atleast_2d(Acl)
    H, h = np.asarray(X.H), np.asarray(X.h)
    worst, witness = -math.inf, None

    def score(Y):
        nonlocal worst, witness
        res = (Y @ H.T - h).max(axis=1)
        i = int(np.argmax(res))
        if res[i] > worst:
            worst, witness = float(res[i]), Y[i].copy()

    base = VX @ Acl.T
    for w in VW:
        for d in VD:
            score(base + w + d)
    rng = np.random.default_rng(seed)

    def mix(V, k):
        lam = rng.dirichlet(np.ones(len(V)), size=k)
        return lam @ V

    if n_samples:
        score(mix(VX, n_samples) @ Acl.T + mix(VW, n_samples) + mix(VD, n_samples))
    return OracleReport(worst, witness, len(VX) * len(VW) * len(VD) + int(n_samples))

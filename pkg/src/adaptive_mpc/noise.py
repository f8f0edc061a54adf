"""Seeded process-noise model.

Each sample is drawn from a fresh counter-based stream keyed by
``(seed, t)`` so a draw never depends on how many draws came before it.
"""
from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedModel
from .geometry import BoxSet

UNIFORM_BOX = "uniform_box"


@dataclass(frozen=True)
class NoiseModel:
    kind: str
    bounds: BoxSet
    seed: int = 0

    def __post_init__(self):
        if self.kind != UNIFORM_BOX:
            raise UnsupportedModel(f"unknown noise model {self.kind!r}")

    def with_seed(self, seed):
        return NoiseModel(self.kind, self.bounds, int(seed))


def _stream(*key):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


def sample_noise(model: NoiseModel, t: int) -> np.ndarray:
    u = _stream(model.seed, t).random(model.bounds.dim)
    lo, up = model.bounds.lower, model.bounds.upper
    return lo + u * (up - lo)


def sample_many(model: NoiseModel, n: int, stream=0) -> np.ndarray:
    """``n`` independent draws (rows) from a stream separate from the per-step ones."""
    u = _stream(model.seed, 2**32 + int(stream)).random((n, model.bounds.dim))
    lo, up = model.bounds.lower, model.bounds.upper
    return lo + u * (up - lo)

"""Left quantiles of scalar projections ``g'w`` of the process noise."""
from dataclasses import dataclass

import numpy as np

from ..errors import UnsupportedModel
from ..noise import UNIFORM_BOX, sample_many

MC_SAMPLES = 10**6
MC_BATCHES = 100


@dataclass(frozen=True)
class QuantileEstimate:
    value: float
    std_error: float
    method: str

    def __float__(self):
        return self.value


def quantile_linear(g, W, noise_model, level, n_samples=MC_SAMPLES) -> QuantileEstimate:
    """Left quantile ``inf{q : P(g'w <= q) >= level}``.

    Closed form when ``g`` has at most one nonzero entry; otherwise a seeded
    Monte Carlo estimate whose standard error comes from batch quantiles.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("quantile level must lie in (0, 1)")
    if noise_model.kind != UNIFORM_BOX:
        raise UnsupportedModel(f"no quantile rule for noise model {noise_model.kind!r}")
    g = np.asarray(g, dtype=float).reshape(-1)
    nz = np.flatnonzero(g)
    if nz.size == 0:
        return QuantileEstimate(0.0, 0.0, "exact")
    if nz.size == 1:
        i = nz[0]
        ends = sorted([g[i] * W.lower[i], g[i] * W.upper[i]])
        return QuantileEstimate(float(ends[0] + level * (ends[1] - ends[0])), 0.0, "exact")

    samples = sample_many(noise_model, n_samples) @ g
    value = float(np.quantile(samples, level, method="inverted_cdf"))
    batches = samples[: n_samples - n_samples % MC_BATCHES].reshape(MC_BATCHES, -1)
    bq = np.quantile(batches, level, axis=1, method="inverted_cdf")
    return QuantileEstimate(value, float(bq.std(ddof=1) / np.sqrt(MC_BATCHES)), "monte_carlo")

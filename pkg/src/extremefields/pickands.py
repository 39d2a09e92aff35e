"""Monte Carlo estimation of Pickands constants from fractional Brownian motion.

H_alpha is the T -> infinity limit of E exp(max_{[0,T]} sqrt(2) B_{alpha/2}(t)
- t^alpha) / T, where B_H is standard fBm (Var B_H(t) = t^{2H}); the sqrt(2)
matches the variance convention under which the closed forms H_1 = 1 and
H_2 = 1/sqrt(pi) hold.  Paths are exact on the grid: increments are
fractional Gaussian noise drawn by circulant embedding.

The direct estimator is heavy-tailed: for large horizons its expectation is
carried by exponentially rare paths, so finite-replicate estimates are
biased far below the constant (see tests/test_acceptance.py and the README
for measurements).  Estimates are reported with their replicate standard
error and no variance reduction is applied.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._rng import derive_rng
from .circulant import Embedding1D, embed_sequence

__all__ = [
    "FbmSpec",
    "PickandsEstimate",
    "StabilizationReport",
    "simulate_fbm",
    "estimate_pickands",
    "stabilization_check",
    "closed_form_pickands",
]

_BATCH = 128  # replicates per vectorized FFT batch; fixed so results do not depend on workers


@dataclass(frozen=True)
class FbmSpec:
    """Grid specification for one fBm path on {0, step, 2*step, ..., horizon}."""

    hurst: float
    horizon: float
    step: float

    def __post_init__(self):
        if not (0.0 < self.hurst <= 1.0):
            raise ValueError("hurst must lie in (0, 1]")
        if not (0.0 < self.step <= self.horizon):
            raise ValueError("need 0 < step <= horizon")
        if self.horizon / self.step > 2**24:
            raise ValueError("horizon/step exceeds the 2^24 memory guard")
        n = self.horizon / self.step
        if abs(n - round(n)) > 1e-9 * max(n, 1.0):
            raise ValueError("horizon must be an integer multiple of step")

    @property
    def n_increments(self) -> int:
        return int(round(self.horizon / self.step))

    def times(self) -> np.ndarray:
        return np.arange(self.n_increments + 1) * self.step


@dataclass(frozen=True)
class PickandsEstimate:
    alpha: float
    horizon: float
    step: float
    replicates: int
    value: float
    std_error: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha, "horizon": self.horizon, "step": self.step,
            "replicates": self.replicates, "value": self.value,
            "std_error": self.std_error, "seed": self.seed,
        }


@dataclass(frozen=True)
class StabilizationReport:
    """Horizon ladder diagnostic: does the estimate settle within noise?"""

    alpha: float
    horizons: tuple[float, ...]
    values: tuple[float, ...]
    std_errors: tuple[float, ...]
    stable: bool


def _fgn_autocov(hurst: float):
    """Unit-spacing fractional Gaussian noise autocovariance."""
    h2 = 2.0 * hurst

    def cov(k):
        k = np.asarray(k, dtype=float)
        return 0.5 * (np.abs(k + 1) ** h2 - 2.0 * np.abs(k) ** h2 + np.abs(k - 1) ** h2)

    return cov


def _fbm_embedding(spec: FbmSpec) -> Embedding1D:
    return embed_sequence(_fgn_autocov(spec.hurst), spec.n_increments)


def _fbm_paths(emb: Embedding1D, spec: FbmSpec, rngs) -> np.ndarray:
    """Exact fBm paths, one per generator, shape (len(rngs), n+1); B(0) = 0."""
    size = emb.size
    n = spec.n_increments
    g = np.empty((len(rngs), size), dtype=complex)
    for i, rng in enumerate(rngs):
        v = rng.standard_normal(2 * size)
        g[i] = v[:size] + 1j * v[size:]
    fgn = (np.fft.ifft(emb.sqrt_eigs * g, axis=1) * math.sqrt(size)).real[:, :n]
    fgn *= spec.step**spec.hurst
    paths = np.empty((len(rngs), n + 1))
    paths[:, 0] = 0.0
    np.cumsum(fgn, axis=1, out=paths[:, 1:])
    return paths


def simulate_fbm(spec: FbmSpec, seed: int) -> np.ndarray:
    """One exact fBm sample at the grid points of ``spec`` (length n+1)."""
    emb = _fbm_embedding(spec)
    return _fbm_paths(emb, spec, [derive_rng(seed)])[0]


def estimate_pickands(
    alpha: float,
    horizon: float,
    step: float,
    replicates: int,
    seed: int,
    workers: int = 1,
) -> PickandsEstimate:
    """Direct estimator: mean over paths of exp(max_grid(sqrt(2) B - t^alpha)),
    divided by the horizon.

    Deterministic per (seed, replicate index); the grid {0} degenerate case
    (a single increment, which is dropped) returns exactly 1/horizon.
    """
    if not (0.0 < alpha <= 2.0):
        raise ValueError("alpha must lie in (0, 2]")
    if horizon < 1.0:
        raise ValueError("horizon must be >= 1")
    if replicates < 1000:
        raise ValueError("need at least 1000 replicates")
    spec = FbmSpec(hurst=alpha / 2.0, horizon=horizon, step=step)

    if spec.n_increments <= 1:
        # grid reduces to {0}: max term is exp(B(0) - 0) = 1 for every path
        return PickandsEstimate(alpha, horizon, step, replicates,
                                value=1.0 / horizon, std_error=0.0, seed=seed)

    emb = _fbm_embedding(spec)
    drift = spec.times() ** alpha
    sqrt2 = math.sqrt(2.0)

    def run_batch(start: int) -> tuple[float, float]:
        stop = min(start + _BATCH, replicates)
        rngs = [derive_rng(seed, r) for r in range(start, stop)]
        paths = _fbm_paths(emb, spec, rngs)
        vals = np.exp(np.max(sqrt2 * paths - drift, axis=1))
        return float(vals.sum()), float((vals * vals).sum())

    starts = range(0, replicates, _BATCH)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(run_batch, starts))
    else:
        partials = [run_batch(s) for s in starts]

    total = math.fsum(p[0] for p in partials)
    total_sq = math.fsum(p[1] for p in partials)
    mean = total / replicates
    var = max(total_sq / replicates - mean * mean, 0.0) * replicates / (replicates - 1)
    return PickandsEstimate(
        alpha=alpha, horizon=horizon, step=step, replicates=replicates,
        value=mean / horizon,
        std_error=math.sqrt(var / replicates) / horizon,
        seed=seed,
    )


def stabilization_check(
    alpha: float,
    horizons,
    step: float,
    replicates: int,
    seed: int,
    workers: int = 1,
) -> StabilizationReport:
    """Estimate over a horizon ladder; stable if the last two values differ by
    less than two combined standard errors.  A noise check, not a proof."""
    horizons = tuple(float(t) for t in horizons)
    if len(horizons) < 2:
        raise ValueError("need at least two horizons")
    ests = [
        estimate_pickands(alpha, t, step, replicates, seed, workers=workers)
        for t in horizons
    ]
    values = tuple(e.value for e in ests)
    errs = tuple(e.std_error for e in ests)
    combined = math.hypot(errs[-1], errs[-2])
    stable = abs(values[-1] - values[-2]) < 2.0 * combined
    return StabilizationReport(alpha, horizons, values, errs, stable)


def closed_form_pickands(alpha: float) -> float | None:
    """Literature closed forms: H_1 = 1, H_2 = 1/sqrt(pi); None otherwise."""
    if abs(alpha - 1.0) < 1e-12:
        return 1.0
    if abs(alpha - 2.0) < 1e-12:
        return 1.0 / math.sqrt(math.pi)
    return None

"""Limiting distribution of rescaled field suprema and normal-law utilities.

The limiting law evaluated here is a lognormal mixture of exponentials:

    F(x) = E exp(-c * exp(-R/(2 gamma) + sqrt(R/gamma) * W)),   W ~ N(0,1),

with c = lambda_J * x_1 * ... * x_d.  For R = 0 the mixing variable
degenerates to 1 and F(x) = exp(-c).  The module also provides the normal
tail Psi, the tail-volume scale m(u) = (prod_i H_i u^{2/alpha_i} Psi(u))^-1,
the threshold transform u_z used for conditioning on the shared shift, and
the limit of m(u)/m(u_z).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc, erfcx

from ._rng import derive_rng

__all__ = [
    "LimitLawParams",
    "TailAsymptotics",
    "QuadratureSpec",
    "normal_tail",
    "log_normal_tail",
    "tail_constant_m",
    "lognormal_mixture_cdf",
    "lognormal_mixture_cdf_mc",
    "limit_cdf",
    "specialization_coefficients",
    "u_z_transform",
    "m_ratio_limit",
]

_SQRT2 = math.sqrt(2.0)
_SQRT_PI = math.sqrt(math.pi)

# c is clamped to this range before exponentiation so that extreme sweeps
# saturate to 0/1 with a warning instead of producing NaN.
_C_MIN = 1e-300
_C_MAX = 1e300


@dataclass(frozen=True)
class LimitLawParams:
    """Inputs of the limiting law: scaling multipliers, set measure, long-range
    constant and the dominant window growth rate."""

    x: tuple[float, ...]
    lambda_J: float
    R: float
    gamma: float

    def __post_init__(self):
        if len(self.x) == 0 or any(not (xi > 0) for xi in self.x):
            raise ValueError("all scaling multipliers x_i must be positive")
        if not self.lambda_J > 0:
            raise ValueError("lambda_J must be positive")
        if self.R < 0:
            raise ValueError("R must be nonnegative")
        if not (0.0 < self.gamma <= 0.5):
            raise ValueError("gamma must lie in (0, 1/2]")

    @property
    def c(self) -> float:
        """Exponential rate c = lambda_J * prod(x)."""
        return self.lambda_J * float(np.prod(self.x))


@dataclass(frozen=True)
class TailAsymptotics:
    """Tail quantities at threshold u.

    ``m`` is the reciprocal of prod_i(H_i u^{2/alpha_i}) * Psi(u); for deep
    thresholds the linear fields overflow/underflow, so the exact log values
    are carried alongside.
    """

    u: float
    psi: float
    m: float
    alphas: tuple[float, ...]
    pickands_values: tuple[float, ...]
    log_psi: float = field(default=float("nan"))
    log_m: float = field(default=float("nan"))


@dataclass(frozen=True)
class QuadratureSpec:
    """How to evaluate the mixing expectation."""

    method: str = "gauss_hermite"
    node_count: int = 64
    mc_draws: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if self.method not in ("gauss_hermite", "monte_carlo"):
            raise ValueError(f"unknown quadrature method {self.method!r}")
        if self.method == "gauss_hermite" and self.node_count < 8:
            raise ValueError("gauss_hermite needs node_count >= 8")
        if self.method == "monte_carlo" and self.mc_draws < 100_000:
            raise ValueError("monte_carlo needs mc_draws >= 1e5")


def normal_tail(u):
    """Standard normal tail Psi(u) = P(W > u) via the complementary error
    function; accurate to machine precision wherever it does not underflow."""
    return 0.5 * erfc(np.asarray(u, dtype=float) / _SQRT2) if np.ndim(u) else 0.5 * math.erfc(u / _SQRT2)


def log_normal_tail(u: float) -> float:
    """log Psi(u), using the scaled erfcx variant beyond u = 6 so the deep
    tail stays finite long after Psi itself underflows."""
    if u <= 6.0:
        return math.log(normal_tail(u))
    # Psi(u) = erfcx(u/sqrt2)/2 * exp(-u^2/2)
    return math.log(0.5 * float(erfcx(u / _SQRT2))) - 0.5 * u * u


def tail_constant_m(u: float, alphas, pickands_values) -> TailAsymptotics:
    """Tail scale m(u) = (prod_i H_i u^{2/alpha_i} * Psi(u))^{-1}.

    Raises ValueError on a length mismatch between alphas and the Pickands
    values.  Overflow of the linear ``m`` field is tolerated (inf); log_m is
    always finite.
    """
    alphas = tuple(float(a) for a in alphas)
    hs = tuple(float(h) for h in pickands_values)
    if len(alphas) != len(hs):
        raise ValueError(
            f"dimension mismatch: {len(alphas)} alphas vs {len(hs)} Pickands values"
        )
    if not u > 0:
        raise ValueError("u must be positive")
    if any(not (0.0 < a <= 2.0) for a in alphas):
        raise ValueError("every alpha must lie in (0, 2]")
    if any(not (h > 0) for h in hs):
        raise ValueError("every Pickands value must be positive")

    log_psi = log_normal_tail(u)
    log_m = -sum(math.log(h) + (2.0 / a) * math.log(u) for a, h in zip(alphas, hs)) - log_psi
    psi = math.exp(log_psi) if log_psi > -745.0 else 0.0
    m = math.exp(log_m) if log_m < 709.0 else float("inf")
    return TailAsymptotics(
        u=float(u), psi=psi, m=m, alphas=alphas, pickands_values=hs,
        log_psi=log_psi, log_m=log_m,
    )


def _clamp_c(c: float) -> float:
    if c == 0.0:
        return 0.0
    if c < _C_MIN or c > _C_MAX:
        warnings.warn(
            f"rate c={c:g} clamped to [{_C_MIN:g}, {_C_MAX:g}]; result saturates",
            RuntimeWarning,
            stacklevel=3,
        )
        return min(max(c, _C_MIN), _C_MAX)
    return c


def _mixture_terms(c: float, shift: float, scale: float, w: np.ndarray) -> np.ndarray:
    """exp(-c * exp(-shift + scale*w)) evaluated safely in log space."""
    y = -shift + scale * w
    log_cy = math.log(c) + y
    # beyond exp overflow the term is exactly 0; exp underflow already
    # rounds the term to 1, which is correct.
    out = np.zeros_like(y)
    ok = log_cy <= 700.0
    with np.errstate(over="ignore"):
        out[ok] = np.exp(-np.exp(log_cy[ok]))
    return out


def lognormal_mixture_cdf(c: float, R: float, gamma: float, quad: QuadratureSpec | None = None) -> float:
    """E exp(-c * exp(-R/(2 gamma) + sqrt(R/gamma) W)) for W standard normal.

    Deterministic under Gauss-Hermite; reproducible per seed under Monte
    Carlo.  Returns a value in [0, 1]; c = 0 returns exactly 1.
    """
    if c < 0:
        raise ValueError("c must be nonnegative")
    if R < 0:
        raise ValueError("R must be nonnegative")
    if not (0.0 < gamma <= 0.5):
        raise ValueError("gamma must lie in (0, 1/2]")
    if quad is None:
        quad = QuadratureSpec()
    c = _clamp_c(float(c))
    if c == 0.0:
        return 1.0

    shift, scale = specialization_coefficients(R, gamma)
    if quad.method == "gauss_hermite":
        nodes, weights = np.polynomial.hermite.hermgauss(quad.node_count)
        vals = _mixture_terms(c, shift, scale, _SQRT2 * nodes)
        result = float(weights @ vals) / _SQRT_PI
    else:
        result, _ = lognormal_mixture_cdf_mc(c, R, gamma, quad.mc_draws, quad.seed)
    if not math.isfinite(result):
        raise ArithmeticError(
            "quadrature overflow in mixture expectation; reduce c or increase nodes"
        )
    return result


def lognormal_mixture_cdf_mc(c: float, R: float, gamma: float, draws: int, seed: int) -> tuple[float, float]:
    """Monte Carlo value of the mixing expectation with its standard error."""
    shift, scale = specialization_coefficients(R, gamma)
    c = _clamp_c(float(c))
    if c == 0.0:
        return 1.0, 0.0
    rng = derive_rng(seed)
    total = 0.0
    total_sq = 0.0
    left = int(draws)
    while left > 0:
        n = min(left, 2_000_000)
        vals = _mixture_terms(c, shift, scale, rng.standard_normal(n))
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        left -= n
    mean = total / draws
    var = max(total_sq / draws - mean * mean, 0.0) * draws / max(draws - 1, 1)
    return mean, math.sqrt(var / draws)


def limit_cdf(params: LimitLawParams, quad: QuadratureSpec | None = None) -> float:
    """Limiting probability that the rescaled supremum stays below threshold."""
    return lognormal_mixture_cdf(params.c, params.R, params.gamma, quad)


def specialization_coefficients(R: float, gamma: float) -> tuple[float, float]:
    """(shift, scale) = (R/(2 gamma), sqrt(R/gamma)) of the mixing exponent.

    gamma = 1/4 recovers the planar case (2R, 2 sqrt(R)); gamma = 1/(2d)
    recovers the equal-growth case (dR, sqrt(2dR)).
    """
    if R < 0:
        raise ValueError("R must be nonnegative")
    if not (0.0 < gamma <= 0.5):
        raise ValueError("gamma must lie in (0, 1/2]")
    return R / (2.0 * gamma), math.sqrt(R / gamma)


def u_z_transform(u: float, z: float, R: float, T: float | None = None, *, log_T: float | None = None) -> float:
    """Threshold seen by the independent layer after conditioning the shared
    shift at z:  u_z = (u - sqrt(R/log T) z) / sqrt(1 - R/log T).

    Pass ``log_T`` instead of ``T`` when the horizon overflows a float
    (log T grows like u^2 in the tied regime).
    """
    if (T is None) == (log_T is None):
        raise ValueError("pass exactly one of T and log_T")
    if log_T is None:
        if not T > 1.0:
            raise ValueError("T must exceed 1")
        log_T = math.log(T)
    elif not log_T > 0.0:
        raise ValueError("log_T must be positive")
    rho = R / log_T
    if rho >= 1.0:
        raise ValueError(
            f"R/log(T) = {rho:g} >= 1: horizon too small for strong-dependence mixing"
        )
    return (u - math.sqrt(rho) * z) / math.sqrt(1.0 - rho)


def m_ratio_limit(z: float, R: float, gamma: float) -> float:
    """Limit of m(u)/m(u_z): exp(-R/(2 gamma) + sqrt(R/gamma) z)."""
    shift, scale = specialization_coefficients(R, gamma)
    return math.exp(-shift + scale * z)

"""Sup-distribution experiments, convergence studies and lattice diagnostics.

Everything here is a pinned-seed Monte Carlo or a deterministic lattice
sum.  Replicate r of an experiment always draws from the stream derived
from (seed, r); the same streams are reused across the threshold ladder
(common random numbers), so trend statistics compare like with like and
rerunning any experiment with the same config is bit-identical regardless
of worker count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_rng
from ._serialize import canonical_json, config_hash
from .fields import CorrelationModel, build_sampler
from .geometry import BudgetError, GridSpec, JordanSet, ScalingPlan, build_grid, evaluate_m_i, scale_set
from .limit_law import (
    QuadratureSpec,
    lognormal_mixture_cdf,
    normal_tail,
    tail_constant_m,
)

__all__ = [
    "SupExperimentConfig",
    "ExperimentReport",
    "LemmaSumReport",
    "RateDescriptor",
    "wilson_interval",
    "estimate_sup_cdf",
    "convergence_study",
    "piterbarg_tail_check",
    "discretization_gap",
    "lemma2_sum",
    "lemma3_sum",
    "lemma3_sum_detailed",
    "lemma_sum_study",
    "corollary_experiments",
]

_BATCH = 64  # replicates per task; fixed so outputs never depend on workers

CSV_HEADER = "u,empirical,ci_low,ci_high,theory,n"


def wilson_interval(successes: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval; well behaved near 0 and 1."""
    if n <= 0:
        raise ValueError("need n > 0")
    p = successes / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z * z / (4 * n * n)) / denom
    low = 0.0 if successes == 0 else max(center - half, 0.0)
    high = 1.0 if successes == n else min(center + half, 1.0)
    return low, high


@dataclass(frozen=True)
class SupExperimentConfig:
    """One sup-CDF experiment: model, window plan, target set and budgets.

    For a mixture model with ``tie_mixture_horizon`` the horizon is re-tied
    at every threshold to the largest window edge max_i(x_i m_i(u)), which
    is how the strong-dependence construction scales with u.
    """

    model: CorrelationModel
    plan: ScalingPlan
    J: JordanSet
    x: tuple[float, ...]
    u_values: tuple[float, ...]
    a: float
    replicates: int
    seed: int
    pickands_values: tuple[float, ...]
    workers: int = 1
    budget: int = 2**26
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    tie_mixture_horizon: bool = True

    def __post_init__(self):
        if self.replicates < 100:
            raise ValueError("need at least 100 replicates")
        if len(self.x) != self.model.dim or self.plan.d != self.model.dim:
            raise ValueError("x, plan and model dimensions must agree")
        if any(not (xi > 0) for xi in self.x):
            raise ValueError("x entries must be positive")
        if not self.u_values:
            raise ValueError("u_values must be nonempty")

    def to_dict(self) -> dict:
        return {
            "model": {
                "family": self.model.family,
                "alphas": list(self.model.alphas),
                "R": self.model.R,
                "bounded_dims": self.model.bounded_dims,
                "block_edge": self.model.mixture.block_edge if self.model.mixture else None,
                "horizon_T": self.model.mixture.horizon_T if self.model.mixture else None,
            },
            "plan": self.plan.to_dict(),
            "J": [[list(lo), list(hi)] for lo, hi in self.J.boxes],
            "x": list(self.x),
            "u_values": list(self.u_values),
            "a": self.a,
            "replicates": self.replicates,
            "seed": self.seed,
            "pickands_values": list(self.pickands_values),
            "budget": self.budget,
            "quad": {
                "method": self.quad.method,
                "node_count": self.quad.node_count,
                "mc_draws": self.quad.mc_draws,
                "seed": self.quad.seed,
            },
            "tie_mixture_horizon": self.tie_mixture_horizon,
        }


@dataclass
class ExperimentReport:
    """Per-threshold records plus reproducibility metadata.

    ``runtime`` (timestamps, wall time) is excluded from the canonical JSON
    so byte comparison checks determinism only.
    """

    kind: str
    records: list
    metadata: dict
    runtime: dict

    def payload(self) -> dict:
        return {"kind": self.kind, "records": self.records, "metadata": self.metadata}

    def canonical(self) -> str:
        return canonical_json(self.payload())

    def to_dict(self) -> dict:
        out = self.payload()
        out["runtime"] = self.runtime
        return out

    def csv_text(self) -> str:
        lines = [CSV_HEADER]
        for rec in self.records:
            lines.append(
                f"{rec['u']},{rec['empirical_cdf']},{rec['wilson_ci_low']},"
                f"{rec['wilson_ci_high']},{rec['theory_limit']},{rec['replicates']}"
            )
        return "\n".join(lines) + "\n"


def _collect_sups(sampler, masks, replicates: int, seed: int, workers: int) -> np.ndarray:
    """Grid suprema per mask per replicate, shape (len(masks), replicates).

    masks entries are boolean arrays over the grid or None for the full
    grid.  Threads fill disjoint replicate slices of a preallocated array.
    """
    out = np.empty((len(masks), replicates))

    def run(start: int) -> None:
        stop = min(start + _BATCH, replicates)
        for r in range(start, stop):
            values = sampler.sample(derive_rng(seed, r))
            for mi, mask in enumerate(masks):
                out[mi, r] = values.max() if mask is None else values[mask].max()

    starts = range(0, replicates, _BATCH)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)
    return out


def _grid_mask(target: JordanSet, grid: GridSpec):
    """Membership mask of the grid in the box union; None when the union is
    a single box covering the whole grid."""
    lo, hi = target.bounding_box()
    if len(target.boxes) == 1:
        blo, bhi = target.boxes[0]
        if all(abs(a - b) < 1e-12 for a, b in zip(blo, lo)) and all(
            abs(a - b) < 1e-12 for a, b in zip(bhi, hi)
        ):
            return None
    axes = [grid.axis_points(i) for i in range(grid.dim)]
    mask = np.zeros(grid.counts, dtype=bool)
    tol = 1e-9
    for blo, bhi in target.boxes:
        block = np.ones(grid.counts, dtype=bool)
        for i, pts in enumerate(axes):
            inside = (pts >= blo[i] - tol) & (pts <= bhi[i] + tol)
            shape = [1] * grid.dim
            shape[i] = -1
            block &= inside.reshape(shape)
        mask |= block
    return mask


def _model_at(config: SupExperimentConfig, m_vec: np.ndarray) -> CorrelationModel:
    model = config.model
    if model.family == "mixture_strong" and config.tie_mixture_horizon:
        horizon = float(np.max(np.asarray(config.x) * m_vec))
        return CorrelationModel.mixture_strong(
            model.alphas, model.R, horizon,
            block_edge=model.mixture.block_edge,
            bounded_dims=model.bounded_dims,
        )
    return model


def _sup_experiment(config: SupExperimentConfig, kind: str, m_bar_fn=None, theory_fn=None):
    """Shared engine: per threshold, scale the set, sample, threshold.

    ``m_bar_fn(u)`` overrides the plan's window vector (corollary variants);
    ``theory_fn(u, c)`` overrides the reported limit value.
    """
    plan, model = config.plan, config.model
    alphas = model.alphas
    x = np.asarray(config.x, dtype=float)
    records = []
    flags = {}
    t0 = time.time()
    for u in config.u_values:
        # thresholds below the theory's domain still threshold honestly, but
        # the window geometry needs a positive scale to be defined at all
        u_geo = max(u, 1.0)
        m_vec = (
            np.asarray(m_bar_fn(u_geo), dtype=float)
            if m_bar_fn is not None
            else evaluate_m_i(plan, u_geo, alphas, config.pickands_values)
        )
        scaled = scale_set(config.J, config.x, m_vec)
        lo, hi = scaled.bounding_box()
        try:
            grid = build_grid(list(zip(lo, hi)), alphas, config.a, u_geo, config.budget)
        except BudgetError:
            flags["truncated"] = True
            flags["truncated_at_u"] = u
            break
        sampler = build_sampler(_model_at(config, m_vec), grid)
        mask = _grid_mask(scaled, grid)
        sups = _collect_sups(sampler, [mask], config.replicates, config.seed, config.workers)[0]
        hits = int((sups <= u).sum())
        emp = hits / config.replicates
        ci_low, ci_high = wilson_interval(hits, config.replicates)
        c = scaled.measure / float(np.prod(m_vec))
        if theory_fn is not None:
            theory = theory_fn(u, c)
        else:
            theory = lognormal_mixture_cdf(c, model.R, plan.gamma, config.quad)
        records.append({
            "u": u,
            "empirical_cdf": emp,
            "wilson_ci_low": ci_low,
            "wilson_ci_high": ci_high,
            "theory_limit": theory,
            "grid_points": grid.total_points,
            "replicates": config.replicates,
            "m_values": [float(v) for v in m_vec],
        })
    cfg = config.to_dict()
    report = ExperimentReport(
        kind=kind,
        records=records,
        metadata={
            "config": cfg,
            "config_hash": config_hash(cfg),
            "seed": config.seed,
            "flags": flags,
        },
        # workers is an execution detail like the timestamp: it never enters
        # the canonical payload, which is bit-identical across pool sizes
        runtime={
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "wall_time_s": time.time() - t0,
            "workers": config.workers,
        },
    )
    return report


def estimate_sup_cdf(config: SupExperimentConfig) -> ExperimentReport:
    """Empirical P(grid sup over the scaled set <= u) per threshold, with
    Wilson intervals and the limiting value alongside."""
    return _sup_experiment(config, kind="sup_cdf")


def convergence_study(config: SupExperimentConfig) -> ExperimentReport:
    """Sup-CDF ladder plus a weak monotone-trend verdict: the discrepancy to
    the limit at the largest threshold must not exceed the one at the
    smallest plus that record's CI width."""
    if len(config.u_values) < 3:
        raise ValueError("a convergence study needs at least 3 thresholds")
    if any(b <= a for a, b in zip(config.u_values, config.u_values[1:])):
        raise ValueError("u_values must be increasing")
    report = _sup_experiment(config, kind="convergence")
    recs = report.records
    if len(recs) >= 2:
        discrepancies = [abs(r["empirical_cdf"] - r["theory_limit"]) for r in recs]
        ci_width = recs[0]["wilson_ci_high"] - recs[0]["wilson_ci_low"]
        verdict = discrepancies[-1] <= discrepancies[0] + ci_width
        report.metadata["verdict"] = {
            "discrepancies": discrepancies,
            "first_ci_width": ci_width,
            "trend_ok": bool(verdict),
        }
    return report


def piterbarg_tail_check(
    model: CorrelationModel,
    alphas,
    pickands_values,
    u_values,
    replicates: int,
    seed: int,
    a: float = 0.25,
    box: JordanSet | None = None,
    workers: int = 1,
) -> ExperimentReport:
    """Empirical P(grid sup over the unit box > u) against the leading tail
    term lambda * prod_i(H_i u^{2/alpha_i}) * Psi(u)."""
    alphas = tuple(float(v) for v in alphas)
    if box is None:
        box = JordanSet.unit_cube(len(alphas))
    lam = box.measure
    records = []
    flags = {}
    t0 = time.time()
    for u in u_values:
        lo, hi = box.bounding_box()
        grid = build_grid(list(zip(lo, hi)), alphas, a, u)
        sampler = build_sampler(model, grid)
        mask = _grid_mask(box, grid)
        sups = _collect_sups(sampler, [mask], replicates, seed, workers)[0]
        exceedances = int((sups > u).sum())
        emp = exceedances / replicates
        theory = lam * float(np.prod([
            h * u ** (2.0 / al) for h, al in zip(pickands_values, alphas)
        ])) * normal_tail(u)
        ci_low, ci_high = wilson_interval(exceedances, replicates)
        records.append({
            "u": u,
            "empirical_cdf": emp,          # exceedance probability here
            "wilson_ci_low": ci_low,
            "wilson_ci_high": ci_high,
            "theory_limit": theory,
            "ratio": emp / theory if theory > 0 else float("inf"),
            "exceedances": exceedances,
            "grid_points": grid.total_points,
            "replicates": replicates,
        })
    if records and records[-1]["exceedances"] < 20:
        flags["insufficient_exceedances"] = True
    cfg = {
        "alphas": list(alphas), "pickands_values": list(pickands_values),
        "u_values": list(u_values), "replicates": replicates, "seed": seed,
        "a": a, "box": [[list(l), list(h)] for l, h in box.boxes],
        "model_family": model.family,
    }
    return ExperimentReport(
        kind="tail_check",
        records=records,
        metadata={"config": cfg, "config_hash": config_hash(cfg), "seed": seed, "flags": flags},
        runtime={"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"), "wall_time_s": time.time() - t0},
    )


def discretization_gap(
    model: CorrelationModel,
    box: JordanSet,
    u: float,
    a_values,
    replicates: int,
    seed: int,
    workers: int = 1,
) -> ExperimentReport:
    """Grid-coarseness bias P(coarse sup <= u) - P(fine sup <= u).

    The continuum proxy uses a_ref = min(a_values)/4; every requested a must
    be an integer multiple of a_ref so coarse grids are exact subsets of the
    fine one and gaps are nonnegative replicate by replicate.
    """
    a_values = [float(v) for v in a_values]
    if any(b >= a for a, b in zip(a_values, a_values[1:])):
        raise ValueError("a_values must be strictly decreasing")
    a_ref = a_values[-1] / 4.0
    strides = []
    for av in a_values:
        s = av / a_ref
        if abs(s - round(s)) > 1e-9:
            raise ValueError("every a must be an integer multiple of min(a)/4")
        strides.append(int(round(s)))
    lo, hi = box.bounding_box()
    alphas = model.alphas
    grid = build_grid(list(zip(lo, hi)), alphas, a_ref, u)
    sampler = build_sampler(model, grid)
    t0 = time.time()
    sups = np.empty((len(strides) + 1, replicates))

    def run(start: int) -> None:
        stop = min(start + _BATCH, replicates)
        for r in range(start, stop):
            values = sampler.sample(derive_rng(seed, r))
            sups[0, r] = values.max()
            for si, s in enumerate(strides):
                sups[si + 1, r] = values[tuple(slice(None, None, s) for _ in range(grid.dim))].max()

    starts = range(0, replicates, _BATCH)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)

    cdf_ref = float((sups[0] <= u).mean())
    records = [{
        "a": a_ref, "cdf": cdf_ref, "gap": 0.0, "stride": 1,
        "grid_points": grid.total_points, "replicates": replicates,
    }]
    for si, (av, s) in enumerate(zip(a_values, strides)):
        cdf = float((sups[si + 1] <= u).mean())
        records.append({
            "a": av, "cdf": cdf, "gap": cdf - cdf_ref, "stride": s,
            "grid_points": int(np.prod([len(range(0, n, s)) for n in grid.counts])),
            "replicates": replicates,
        })
    cfg = {
        "u": u, "a_values": a_values, "replicates": replicates, "seed": seed,
        "box": [[list(l), list(h)] for l, h in box.boxes], "alphas": list(alphas),
        "model_family": model.family,
    }
    return ExperimentReport(
        kind="discretization_gap",
        records=records,
        metadata={"config": cfg, "config_hash": config_hash(cfg), "seed": seed, "flags": {}},
        runtime={"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"), "wall_time_s": time.time() - t0},
    )


def _default_pickands(alphas, pickands_values):
    from .pickands import closed_form_pickands

    if pickands_values is not None:
        return tuple(float(h) for h in pickands_values)
    out = []
    for a in alphas:
        h = closed_form_pickands(a)
        if h is None:
            raise ValueError(
                f"no closed form for alpha={a}; pass pickands_values explicitly"
            )
        out.append(h)
    return tuple(out)


def lemma2_sum(
    model: CorrelationModel,
    u: float,
    a: float,
    eps: float,
    R: float,
    T: float,
    pickands_values=None,
) -> float:
    """Deterministic short-range comparison sum over the lattice inside
    (-eps, eps)^d minus the origin.

    Every term carries the factor R/log T, so the sum is exactly zero at
    R = 0.  Raises when the inner square-root argument is nonpositive
    (eps too large for the model) or when r <= 0 inside the window.
    """
    if not T > 1.0:
        raise ValueError("T must exceed 1")
    if R < 0:
        raise ValueError("R must be nonnegative")
    alphas = model.alphas
    d = len(alphas)
    hs = _default_pickands(alphas, pickands_values)
    q = [a * u ** (-2.0 / al) for al in alphas]
    axes = []
    for qi in q:
        jmax = int(math.ceil(eps / qi)) - 1
        axes.append(np.arange(-jmax, jmax + 1) * qi)
    total_pts = int(np.prod([len(ax) for ax in axes]))
    if total_pts > 2**22:
        raise BudgetError(f"short-range lattice holds {total_pts} points")
    if total_pts <= 1:
        return 0.0
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack(mesh, axis=-1).reshape(-1, d)
    pts = pts[~np.all(pts == 0.0, axis=1)]
    s = np.zeros(len(pts))
    for i, al in enumerate(alphas):
        s += np.abs(pts[:, i]) ** al
    r = np.exp(-s)
    if (r <= 0).any():
        raise ValueError("correlation not positive inside the window; shrink eps")
    rho = R / math.log(T)
    inner = r + (1.0 - r) * rho
    arg = 1.0 - inner * inner
    if (arg <= 0).any():
        raise ValueError("inner square-root argument <= 0; eps too large")
    terms = (1.0 - r) * rho * arg**-0.5 * np.exp(-u * u / (1.0 + inner))
    term_sum = float(terms.sum())
    if term_sum == 0.0:
        return 0.0
    tail = tail_constant_m(u, alphas, hs)
    log_pref = tail.log_m - math.fsum(math.log(qi) for qi in q)
    return math.exp(log_pref + math.log(term_sum))


def lemma3_sum_detailed(
    model: CorrelationModel,
    u: float,
    a: float,
    eps: float,
    T_vector,
    R: float,
    shell: float = 8.0,
    budget: int = 2**22,
    allow_stride: bool = True,
) -> tuple[float, dict]:
    """Long-range comparison sum over the window lattice outside (-eps, eps)^d.

    The zone with sup-norm below ``shell`` is enumerated exactly (it holds
    the branch boundary at 1 and all non-negligible correlations); beyond it
    the lattice is subsampled with a deterministic stride and reweighted by
    the stride volume, flagged in the returned info.
    """
    alphas = model.alphas
    d = len(alphas)
    k = model.bounded_dims
    T_vector = [float(t) for t in T_vector]
    if len(T_vector) != d or any(t <= 0 for t in T_vector):
        raise ValueError("T_vector needs one positive entry per coordinate")
    T = max(T_vector)
    if R > 0 and not T > 1.0:
        raise ValueError("max(T_i) must exceed 1 when R > 0")
    rho = R / math.log(T) if R > 0 else 0.0
    q = [a * u ** (-2.0 / al) for al in alphas]

    def summand(pts: np.ndarray) -> np.ndarray:
        s = np.zeros(len(pts))
        for i, al in enumerate(alphas):
            s += np.abs(pts[:, i]) ** al
        r = np.exp(-s)
        near = np.max(np.abs(pts[:, k:]), axis=1) < 1.0
        rho_t = np.where(near, 1.0, np.abs(r - rho))
        varrho_t = np.where(near, np.abs(r) + (1.0 - r) * rho, rho)
        return rho_t * np.exp(-u * u / (1.0 + np.maximum(np.abs(r), varrho_t)))

    # exact zone: fit within half the budget, never below the branch edge at 1
    shell_eff = min(shell, max(min(T_vector), 1.0))
    while True:
        exact_idx = [int(math.floor(min(shell_eff, T_vector[i]) / q[i])) for i in range(d)]
        counts = [2 * j + 1 for j in exact_idx]
        if int(np.prod(counts)) <= budget // 2 or shell_eff <= 1.0:
            break
        shell_eff = max(shell_eff / 2.0, 1.0)
    if int(np.prod(counts)) > budget:
        raise BudgetError("exact zone of the long-range lattice exceeds the budget")
    axes = [np.arange(-j, j + 1) * q[i] for i, j in enumerate(exact_idx)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack(mesh, axis=-1).reshape(-1, d)
    keep = ~np.all(np.abs(pts) < eps, axis=1)
    near_terms = summand(pts[keep])
    near_sum = float(near_terms.sum())
    max_term = float(near_terms.max()) if keep.any() else 0.0

    # far zone: strided lattice over the full window, minus the exact-zone
    # index box (index comparison avoids double counting at the boundary)
    n_idx = [int(math.floor(T_vector[i] / q[i])) for i in range(d)]
    total_far = np.prod([2 * n + 1 for n in n_idx], dtype=float)
    stride = 1
    if total_far > budget:
        if not allow_stride:
            raise BudgetError(f"window lattice holds {total_far:.3g} points")
        stride = int(math.ceil((total_far / budget) ** (1.0 / d)))
    far_j_axes = [np.arange(-n_idx[i], n_idx[i] + 1, stride) for i in range(d)]
    far_mesh_j = np.meshgrid(*far_j_axes, indexing="ij")
    far_j = np.stack(far_mesh_j, axis=-1).reshape(-1, d)
    outside = np.zeros(len(far_j), dtype=bool)
    for i in range(d):
        outside |= np.abs(far_j[:, i]) > exact_idx[i]
    far_pts = far_j[outside] * np.asarray(q)
    far_sum = float(summand(far_pts).sum()) * stride**d if outside.any() else 0.0

    log_pref = math.fsum(math.log(t) for t in T_vector) - math.fsum(math.log(qi) for qi in q)
    total = near_sum + far_sum
    value = math.exp(log_pref + math.log(total)) if total > 0 else 0.0
    info = {
        "strided": stride > 1,
        "stride": stride,
        "shell": shell_eff,
        "exact_points": int(keep.sum()),
        "far_points_kept": int(outside.sum()),
        "max_term": max_term,
    }
    return value, info


def lemma3_sum(model, u, a, eps, T_vector, R, **kwargs) -> float:
    value, _ = lemma3_sum_detailed(model, u, a, eps, T_vector, R, **kwargs)
    return value


@dataclass
class LemmaSumReport:
    """Lattice diagnostic over a threshold ladder."""

    lemma: int
    u_values: list
    sum_values: list
    components: list          # per-u max term (lemma 3) or term count (lemma 2)
    parameters: dict

    def payload(self) -> dict:
        return {
            "kind": f"lemma{self.lemma}_sum",
            "u_values": self.u_values,
            "sum_values": self.sum_values,
            "components": self.components,
            "parameters": self.parameters,
        }

    def csv_text(self) -> str:
        lines = ["u,sum,component"]
        for u, s, c in zip(self.u_values, self.sum_values, self.components):
            lines.append(f"{u},{s},{c}")
        return "\n".join(lines) + "\n"


def lemma_sum_study(
    lemma: int,
    model: CorrelationModel,
    u_values,
    a: float,
    eps: float,
    R: float,
    T_for_u,
    pickands_values=None,
    **kwargs,
) -> LemmaSumReport:
    """Evaluate one lemma sum across thresholds.  ``T_for_u(u)`` returns the
    horizon T (lemma 2) or the window vector T_i (lemma 3)."""
    if lemma not in (2, 3):
        raise ValueError("lemma must be 2 or 3")
    sums, comps = [], []
    for u in u_values:
        if lemma == 2:
            val = lemma2_sum(model, u, a, eps, R, T_for_u(u), pickands_values)
            comp = None
        else:
            val, info = lemma3_sum_detailed(model, u, a, eps, T_for_u(u), R, **kwargs)
            comp = info["max_term"]
        sums.append(val)
        comps.append(comp)
    return LemmaSumReport(
        lemma=lemma,
        u_values=[float(u) for u in u_values],
        sum_values=sums,
        components=comps,
        parameters={"a": a, "eps": eps, "R": R, "alphas": list(model.alphas)},
    )


@dataclass(frozen=True)
class RateDescriptor:
    """Shrinking-window rate u^power * (log u)^log_power for the slow-decay
    corollary experiments."""

    power: float
    log_power: float = 0.0

    def value(self, u: float) -> float:
        v = u**self.power
        if self.log_power:
            if u <= 1.0:
                raise ValueError("log factors need u > 1")
            v *= math.log(u) ** self.log_power
        return v

    def to_dict(self) -> dict:
        return {"power": self.power, "log_power": self.log_power}


def corollary_experiments(
    kind: str,
    config: SupExperimentConfig,
    kappa: float = 0.125,
    c_descriptor=None,
    shrink: tuple[RateDescriptor, ...] = (),
) -> ExperimentReport:
    """Window splits outside the main plan: 'szybko' shrinks the first
    coordinate like exp(-kappa u^2) c(u) (limit 0); 'wolno' shrinks leading
    coordinates at slowly-varying rates (conjectured to keep the limit law).

    The last coordinate always compensates so the window volume stays m(u).
    kappa = 0 is the control arm that reduces to the covered regime.
    """
    from .geometry import ONE

    if kind not in ("szybko", "wolno"):
        raise ValueError("kind must be 'szybko' or 'wolno'")
    plan, model = config.plan, config.model
    alphas = model.alphas
    d = plan.d
    c_desc = c_descriptor or ONE
    if kind == "szybko" and kappa < 0:
        raise ValueError("kappa must be nonnegative")
    if kind == "wolno" and not shrink:
        raise ValueError("wolno needs at least one shrink descriptor")
    n_shrink = 1 if kind == "szybko" else len(shrink)
    if n_shrink >= d:
        raise ValueError("at least one coordinate must absorb the compensation")

    def m_bar(u: float) -> np.ndarray:
        tail = tail_constant_m(u, alphas, config.pickands_values)
        out = np.empty(d)
        if kind == "szybko":
            out[0] = math.exp(-kappa * u * u) * c_desc.value(u)
        else:
            for i, desc in enumerate(shrink):
                out[i] = desc.value(u)
        # middle coordinates follow the plan's declared factors
        for i in range(n_shrink, d - 1):
            if i < plan.k:
                out[i] = plan.M[i]
            else:
                ci = plan.c_descriptors[i - plan.k]
                out[i] = math.exp(plan.gammas[i - plan.k] * u * u + ci.log_value(u))
        out[d - 1] = math.exp(tail.log_m - math.fsum(math.log(v) for v in out[: d - 1]))
        return out

    if kind == "szybko" and kappa > 0:
        theory_fn = lambda u, c: 0.0  # noqa: E731  (the limit is degenerate)
    else:
        theory_fn = None
    report = _sup_experiment(config, kind=f"corollary_{kind}", m_bar_fn=m_bar, theory_fn=theory_fn)
    emps = [r["empirical_cdf"] for r in report.records]
    if kind == "szybko":
        verdict = {
            "decreasing": bool(all(b < a for a, b in zip(emps, emps[1:]))),
            "final_value": emps[-1] if emps else None,
            "kappa": kappa,
        }
    else:
        discrepancies = [abs(r["empirical_cdf"] - r["theory_limit"]) for r in report.records]
        ci_width = (
            report.records[0]["wilson_ci_high"] - report.records[0]["wilson_ci_low"]
            if report.records else 0.0
        )
        verdict = {
            "discrepancies": discrepancies,
            "trend_ok": bool(discrepancies[-1] <= discrepancies[0] + ci_width) if discrepancies else None,
            "conjecture_conditional": True,
            "shrink": [s.to_dict() for s in shrink],
        }
    report.metadata["verdict"] = verdict
    return report

"""Box-union sets, observation-window scaling plans and lattice grids.

A JordanSet is a finite union of pairwise interior-disjoint closed boxes.
A ScalingPlan fixes per-coordinate window growth m_i(u): constants M_i for
the k bounded coordinates and exp(gamma_i u^2) c_i(u) for the unbounded
ones, with sum gamma_i = 1/2; the last unbounded factor is defined as
m(u) / prod(others) so the product constraint holds exactly.  Grids use the
spacing q_i = a * u^(-2/alpha_i).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .limit_law import tail_constant_m

__all__ = [
    "BudgetError",
    "JordanSet",
    "CDescriptor",
    "ScalingPlan",
    "GridSpec",
    "measure",
    "evaluate_m_i",
    "scale_set",
    "inner_outer_approx",
    "build_grid",
]


class BudgetError(RuntimeError):
    """A point/cell budget was exhausted."""


@dataclass(frozen=True)
class JordanSet:
    """Finite union of pairwise interior-disjoint closed axis-aligned boxes,
    stored as ((lower, upper), ...) corner pairs."""

    boxes: tuple[tuple[tuple[float, ...], tuple[float, ...]], ...]

    def __post_init__(self):
        if not self.boxes:
            raise ValueError("a JordanSet needs at least one box")
        d = len(self.boxes[0][0])
        for lo, hi in self.boxes:
            if len(lo) != d or len(hi) != d:
                raise ValueError("inconsistent box dimensions")
            if any(not (h > l) for l, h in zip(lo, hi)):
                raise ValueError("degenerate box: every edge must have positive length")
        self._check_disjoint()

    def _check_disjoint(self):
        lo = np.array([b[0] for b in self.boxes])
        hi = np.array([b[1] for b in self.boxes])
        n = len(self.boxes)
        chunk = max(1, 2**22 // max(n, 1))
        for s in range(0, n, chunk):
            e = min(s + chunk, n)
            # open-interval overlap on every axis means interior intersection
            over = (lo[s:e, None, :] < hi[None, :, :]) & (hi[s:e, None, :] > lo[None, :, :])
            bad = over.all(axis=2)
            bad[np.arange(s, e) - s, np.arange(s, e)] = False
            if bad.any():
                i, j = np.argwhere(bad)[0]
                raise ValueError(f"boxes {s + i} and {j} have overlapping interiors")

    @property
    def dim(self) -> int:
        return len(self.boxes[0][0])

    @property
    def measure(self) -> float:
        return float(
            sum(math.prod(h - l for l, h in zip(lo, hi)) for lo, hi in self.boxes)
        )

    def bounding_box(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        lo = np.array([b[0] for b in self.boxes]).min(axis=0)
        hi = np.array([b[1] for b in self.boxes]).max(axis=0)
        return tuple(lo), tuple(hi)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Boolean membership for an (..., d) array of points (closed boxes)."""
        pts = np.asarray(points, dtype=float)
        out = np.zeros(pts.shape[:-1], dtype=bool)
        for lo, hi in self.boxes:
            inside = np.ones(pts.shape[:-1], dtype=bool)
            for i in range(self.dim):
                inside &= (pts[..., i] >= lo[i]) & (pts[..., i] <= hi[i])
            out |= inside
        return out

    def to_json(self) -> str:
        return json.dumps([[list(lo), list(hi)] for lo, hi in self.boxes])

    @classmethod
    def from_json(cls, text: str) -> "JordanSet":
        data = json.loads(text)
        return cls(tuple((tuple(map(float, lo)), tuple(map(float, hi))) for lo, hi in data))

    @classmethod
    def unit_cube(cls, d: int) -> "JordanSet":
        return cls((((0.0,) * d, (1.0,) * d),))

    @classmethod
    def box(cls, lower, upper) -> "JordanSet":
        return cls(((tuple(map(float, lower)), tuple(map(float, upper))),))


def measure(j: JordanSet) -> float:
    """Lebesgue measure: the sum of box volumes."""
    return j.measure


@dataclass(frozen=True)
class CDescriptor:
    """Slowly varying factor c(u): a constant, a power u^p, or (log u)^p.
    All three satisfy log c(u) = o(u^2)."""

    kind: str
    param: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "power", "log_power"):
            raise ValueError(f"unknown c-descriptor kind {self.kind!r}")
        if self.kind == "constant" and not self.param > 0:
            raise ValueError("constant c must be positive")

    def value(self, u: float) -> float:
        if self.kind == "constant":
            return self.param
        if self.kind == "power":
            return u**self.param
        if u <= 1.0:
            raise ValueError("log_power descriptors need u > 1")
        return math.log(u) ** self.param

    def log_value(self, u: float) -> float:
        if self.kind == "constant":
            return math.log(self.param)
        if self.kind == "power":
            return self.param * math.log(u)
        if u <= 1.0:
            raise ValueError("log_power descriptors need u > 1")
        return self.param * math.log(math.log(u))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "param": self.param}

    @classmethod
    def from_dict(cls, data: dict) -> "CDescriptor":
        return cls(kind=data["kind"], param=float(data.get("param", 1.0)))


ONE = CDescriptor("constant", 1.0)


@dataclass(frozen=True)
class ScalingPlan:
    """Window growth plan (k, M_i, gamma_i, c_i) for a d-dimensional field.

    M has length k (bounded coordinates); gammas and c_descriptors have
    length d - k and must satisfy sum(gammas) = 1/2 exactly, gamma_i in
    [0, 1/2].  The dominant rate gamma = max(gammas) is always positive.
    """

    d: int
    k: int
    M: tuple[float, ...]
    gammas: tuple[float, ...]
    c_descriptors: tuple[CDescriptor, ...]

    def __post_init__(self):
        if not (0 <= self.k < self.d):
            raise ValueError("need 0 <= k < d")
        if len(self.M) != self.k:
            raise ValueError("M must list one limit per bounded coordinate")
        if any(not (m > 0) for m in self.M):
            raise ValueError("bounded limits M_i must be positive")
        if len(self.gammas) != self.d - self.k or len(self.c_descriptors) != self.d - self.k:
            raise ValueError("gammas and c_descriptors must cover the unbounded coordinates")
        if any(g < 0 or g > 0.5 for g in self.gammas):
            raise ValueError("every gamma_i must lie in [0, 1/2]")
        total = math.fsum(self.gammas)
        if abs(total - 0.5) > 1e-12:
            raise ValueError(f"gamma sum violated: sum(gammas) = {total!r}, must equal 1/2")
        if max(self.gammas) <= 0:
            raise ValueError("gamma = max(gammas) must be positive")

    @property
    def gamma(self) -> float:
        return max(self.gammas)

    @classmethod
    def symmetric(cls, d: int) -> "ScalingPlan":
        """All coordinates unbounded with equal rates gamma_i = 1/(2d), c_i = 1."""
        g = 0.5 / d
        gammas = [g] * d
        gammas[-1] = 0.5 - math.fsum(gammas[:-1])
        return cls(d=d, k=0, M=(), gammas=tuple(gammas), c_descriptors=(ONE,) * d)

    def to_dict(self) -> dict:
        return {
            "d": self.d, "k": self.k, "M": list(self.M), "gammas": list(self.gammas),
            "c_descriptors": [c.to_dict() for c in self.c_descriptors],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScalingPlan":
        return cls(
            d=int(data["d"]), k=int(data["k"]),
            M=tuple(float(m) for m in data["M"]),
            gammas=tuple(float(g) for g in data["gammas"]),
            c_descriptors=tuple(CDescriptor.from_dict(c) for c in data["c_descriptors"]),
        )


def evaluate_m_i(
    plan: ScalingPlan,
    u: float,
    alphas,
    pickands_values,
    growth_tolerance: float = 0.5,
) -> np.ndarray:
    """Per-coordinate window sizes m_i(u).

    Bounded coordinates return M_i; unbounded ones exp(gamma_i u^2) c_i(u),
    except the last, which is m(u) / prod(others) so that prod m_i = m(u)
    exactly.  Warns when the closing factor's implied growth rate strays
    from its declared gamma by more than ``growth_tolerance``; the implied
    rate carries slowly varying corrections of order log(u)/u^2, so tight
    tolerances are only meaningful at large u.
    """
    if not u > 0:
        raise ValueError("u must be positive")
    tail = tail_constant_m(u, alphas, pickands_values)
    out = np.empty(plan.d)
    out[: plan.k] = plan.M
    log_partial = 0.0
    for idx in range(plan.k, plan.d - 1):
        g = plan.gammas[idx - plan.k]
        c = plan.c_descriptors[idx - plan.k]
        log_mi = g * u * u + c.log_value(u)
        out[idx] = math.exp(log_mi)
        log_partial += log_mi
    log_partial += math.fsum(math.log(m) for m in plan.M)
    log_last = tail.log_m - log_partial
    out[-1] = math.exp(log_last)

    g_last = plan.gammas[-1]
    c_last = plan.c_descriptors[-1]
    implied = (log_last - c_last.log_value(u)) / (u * u)
    if abs(implied - g_last) > growth_tolerance:
        warnings.warn(
            f"closing factor grows like exp({implied:.4f} u^2) at u={u:g}, "
            f"declared gamma_d={g_last:g}",
            RuntimeWarning,
            stacklevel=2,
        )
    return out


def scale_set(j: JordanSet, x, m_values) -> JordanSet:
    """Coordinate-wise scaling by x_i * m_i; the measure scales by prod(x_i m_i)."""
    x = np.asarray(x, dtype=float)
    m_values = np.asarray(m_values, dtype=float)
    if x.shape != (j.dim,) or m_values.shape != (j.dim,):
        raise ValueError("x and m_values must have one entry per coordinate")
    if (x <= 0).any() or (m_values <= 0).any():
        raise ValueError("scaling factors must be positive")
    s = x * m_values
    boxes = tuple(
        (tuple(np.asarray(lo) * s), tuple(np.asarray(hi) * s)) for lo, hi in j.boxes
    )
    return JordanSet(boxes)


def _merge_cells(flags: np.ndarray, lows, widths) -> tuple:
    """Merge a boolean cell array into boxes by run-length merging along the
    last axis.  Returns corner pairs; cells share faces only."""
    d = flags.ndim
    boxes = []
    it = np.ndindex(*flags.shape[:-1]) if d > 1 else [()]
    for idx in it:
        row = flags[idx]
        n = row.size
        i = 0
        while i < n:
            if row[i]:
                start = i
                while i < n and row[i]:
                    i += 1
                lo = [lows[a] + idx[a] * widths[a] for a in range(d - 1)]
                hi = [lows[a] + (idx[a] + 1) * widths[a] for a in range(d - 1)]
                lo.append(lows[d - 1] + start * widths[d - 1])
                hi.append(lows[d - 1] + i * widths[d - 1])
                boxes.append((tuple(lo), tuple(hi)))
            else:
                i += 1
    return tuple(boxes)


def inner_outer_approx(
    predicate,
    bounding_box,
    eps: float,
    cell_budget: int = 2**24,
) -> tuple[JordanSet, JordanSet]:
    """Sandwich a Jordan-measurable region between box unions L and U with
    lambda(U) - lambda(L) <= eps.

    ``predicate`` maps an (..., d) point array to booleans.  Cells of a
    uniform dyadic partition are classified from a 3^d lattice of strictly
    interior sample points, so a target that is itself an aligned box union
    resolves exactly.  The partition refines until the boundary mass is
    below eps or the cell budget is exhausted (BudgetError).
    """
    lo, hi = (np.asarray(bounding_box[0], float), np.asarray(bounding_box[1], float))
    d = lo.size
    if not eps > 0:
        raise ValueError("eps must be positive")
    fractions = np.array([0.05, 0.25, 0.5, 0.75, 0.95])
    nf = fractions.size
    level = 0
    prev = None
    while (2**level) ** d <= cell_budget:
        n = 2**level
        widths = (hi - lo) / n
        sample_axes = [
            (lo[a] + widths[a] * (np.arange(n)[:, None] + fractions[None, :]).ravel())
            for a in range(d)
        ]
        mesh = np.meshgrid(*sample_axes, indexing="ij")
        pts = np.stack(mesh, axis=-1)
        flags = np.asarray(predicate(pts), dtype=bool)
        # collapse each cell's sample block
        for a in range(d):
            flags = flags.reshape(flags.shape[: 2 * a] + (n, nf) + flags.shape[2 * a + 1 :])
        all_in = flags.all(axis=tuple(range(1, 2 * d, 2)))
        any_in = flags.any(axis=tuple(range(1, 2 * d, 2)))
        boundary = any_in & ~all_in
        cell_vol = float(np.prod(widths))
        gap = boundary.sum() * cell_vol
        lam_inner = all_in.sum() * cell_vol
        lam_outer = lam_inner + gap
        # a coarse level can misclassify an entire cell, so require the
        # measures to have settled across one refinement before accepting
        stable = prev is not None and abs(lam_inner - prev[0]) <= eps and abs(lam_outer - prev[1]) <= eps
        if gap <= eps and all_in.any() and stable:
            inner_boxes = _merge_cells(all_in, lo, widths)
            outer_boxes = _merge_cells(all_in | boundary, lo, widths)
            return JordanSet(inner_boxes), JordanSet(outer_boxes)
        prev = (lam_inner, lam_outer)
        level += 1
    raise BudgetError(
        f"cell budget {cell_budget} exhausted before reaching gap <= {eps:g}; "
        "eps too small or boundary too rough"
    )


@dataclass(frozen=True)
class GridSpec:
    """Regular observation lattice with spacings q_i = a * u^(-2/alpha_i)."""

    a: float
    u: float
    spacings: tuple[float, ...]
    extents: tuple[tuple[float, float], ...]
    counts: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.spacings)

    @property
    def total_points(self) -> int:
        return int(np.prod([float(c) for c in self.counts]))

    def axis_points(self, i: int) -> np.ndarray:
        return self.extents[i][0] + self.spacings[i] * np.arange(self.counts[i])


def build_grid(extents, alphas, a: float, u: float, budget: int = 2**26) -> GridSpec:
    """Grid over per-axis intervals with the canonical spacing formula.

    ``extents`` entries are (lo, hi) pairs (a bare length means (0, length)).
    Raises BudgetError when the total point count exceeds ``budget``.
    """
    if not a > 0 or not u > 0:
        raise ValueError("a and u must be positive")
    norm = []
    for e in extents:
        lo, hi = (0.0, float(e)) if np.isscalar(e) else (float(e[0]), float(e[1]))
        if not hi > lo:
            raise ValueError("extent upper bound must exceed lower bound")
        norm.append((lo, hi))
    alphas = tuple(float(x) for x in alphas)
    if len(alphas) != len(norm):
        raise ValueError("one alpha per extent required")
    spacings = tuple(a * u ** (-2.0 / al) for al in alphas)
    counts = tuple(
        int(math.floor((hi - lo) / q + 1e-9)) + 1 for (lo, hi), q in zip(norm, spacings)
    )
    total = int(np.prod([float(c) for c in counts]))
    if total > budget:
        raise BudgetError(f"grid would hold {total} points, budget is {budget}")
    return GridSpec(a=a, u=u, spacings=spacings, extents=tuple(norm), counts=counts)

"""Value distributions, instances, and the common threshold machinery.

Every item's value law exposes ``cdf``, ``sf`` (survival), ``logcdf`` and a
sampler.  Survival and log-CDF are evaluated directly rather than through
``1 - cdf`` so that the level functions keep relative precision when the
exceedance probability is tiny (t near 0) and when the max-CDF is tiny
(t near 1).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import NonInvertible

TOL_VALUE = 1e-10
TOL_PROB = 1e-9
DEFAULT_SMOOTHING_FRACTION = 1e-6

ArrayLike = Union[float, np.ndarray]


def _as_array(x: ArrayLike) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


class _Law:
    """Shared helpers; subclasses implement ``cdf`` and ``sf``."""

    def logcdf(self, x: ArrayLike) -> np.ndarray:
        x = _as_array(x)
        sf = self.sf(x)
        cdf = self.cdf(x)
        with np.errstate(divide="ignore"):
            return np.where(sf < 0.5, np.log1p(-sf), np.log(cdf))

    @property
    def span(self) -> float:
        lo, hi = self.support
        return hi - lo


@dataclass(frozen=True)
class Uniform(_Law):
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"Uniform requires lo < hi, got ({self.lo}, {self.hi})")
        if self.lo < 0:
            raise ValueError("values must be non-negative")

    @property
    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def cdf(self, x):
        return np.clip((_as_array(x) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def sf(self, x):
        return np.clip((self.hi - _as_array(x)) / (self.hi - self.lo), 0.0, 1.0)

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size)


@dataclass(frozen=True)
class Power(_Law):
    """CDF ((x - lo) / (hi - lo)) ** exponent on [lo, hi].

    With ``exponent = 1 / N`` the maximum of N independent copies is uniform,
    which is how the Peng-Tang hard instance is built.
    """

    hi: float
    exponent: float
    lo: float = 0.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("Power requires lo < hi")
        if self.exponent <= 0:
            raise ValueError("exponent must be positive")
        if self.lo < 0:
            raise ValueError("values must be non-negative")

    @property
    def support(self) -> tuple[float, float]:
        return (self.lo, self.hi)

    def _logu(self, x):
        u = np.clip((_as_array(x) - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        with np.errstate(divide="ignore"):
            return np.log(u)

    def cdf(self, x):
        return np.exp(self.exponent * self._logu(x))

    def sf(self, x):
        return -np.expm1(self.exponent * self._logu(x))

    def logcdf(self, x):
        return self.exponent * self._logu(x)

    def mean(self) -> float:
        return self.lo + (self.hi - self.lo) * self.exponent / (self.exponent + 1.0)

    def sample(self, rng, size):
        u = rng.uniform(0.0, 1.0, size)
        return self.lo + (self.hi - self.lo) * u ** (1.0 / self.exponent)


@dataclass(frozen=True)
class PiecewiseLinearCdf(_Law):
    knots: tuple

    def __post_init__(self):
        knots = tuple((float(v), float(c)) for v, c in self.knots)
        object.__setattr__(self, "knots", knots)
        if len(knots) < 2:
            raise ValueError("need at least two knots")
        v = np.array([k[0] for k in knots])
        c = np.array([k[1] for k in knots])
        if np.any(np.diff(v) < 0) or np.any(np.diff(c) < 0):
            raise ValueError("knots must be non-decreasing in value and cdf")
        if v[0] < 0:
            raise ValueError("values must be non-negative")
        if abs(c[-1] - 1.0) > 1e-12 or c[0] < 0:
            raise ValueError("cdf knots must start >= 0 and end at 1")
        if v[-1] <= v[0]:
            raise ValueError("knots must span a positive interval")

    @cached_property
    def _arrays(self):
        v = np.array([k[0] for k in self.knots])
        c = np.array([k[1] for k in self.knots])
        return v, c, 1.0 - c

    @property
    def support(self) -> tuple[float, float]:
        v, _, _ = self._arrays
        return (float(v[0]), float(v[-1]))

    def cdf(self, x):
        v, c, _ = self._arrays
        return np.interp(_as_array(x), v, c, left=0.0, right=1.0)

    def sf(self, x):
        v, _, cc = self._arrays
        return np.interp(_as_array(x), v, cc, left=1.0, right=0.0)

    def mean(self) -> float:
        v, c, _ = self._arrays
        return float(np.sum(np.diff(c) * 0.5 * (v[1:] + v[:-1])) + c[0] * v[0])

    def sample(self, rng, size):
        v, c, _ = self._arrays
        return np.interp(rng.uniform(0.0, 1.0, size), c, v)


@dataclass(frozen=True)
class FiniteSupport(_Law):
    """Atoms ``((value, prob), ...)``; continuized inside an :class:`Instance`."""

    points: tuple

    def __post_init__(self):
        pts = tuple(sorted((float(v), float(p)) for v, p in self.points))
        object.__setattr__(self, "points", pts)
        if not pts:
            raise ValueError("empty support")
        if any(v < 0 for v, _ in pts) or any(p < 0 for _, p in pts):
            raise ValueError("values and probabilities must be non-negative")
        if abs(sum(p for _, p in pts) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")

    @property
    def support(self) -> tuple[float, float]:
        return (self.points[0][0], self.points[-1][0])

    def cdf(self, x):
        v = np.array([p[0] for p in self.points])
        c = np.cumsum([p[1] for p in self.points])
        idx = np.searchsorted(v, _as_array(x), side="right")
        return np.where(idx > 0, c[np.maximum(idx - 1, 0)], 0.0)

    def sf(self, x):
        v = np.array([p[0] for p in self.points])
        tail = np.cumsum([p[1] for p in self.points][::-1])[::-1]
        idx = np.searchsorted(v, _as_array(x), side="right")
        return np.where(idx < len(v), tail[np.minimum(idx, len(v) - 1)], 0.0)

    def mean(self) -> float:
        return sum(v * p for v, p in self.points)

    def sample(self, rng, size):
        v = np.array([p[0] for p in self.points])
        pr = np.array([p[1] for p in self.points])
        return rng.choice(v, size=size, p=pr / pr.sum())

    def smoothed(self, width: float) -> PiecewiseLinearCdf:
        """Convolve each atom with a uniform kernel of the given width.

        Kernels are centered on the atom and shifted right where they would
        cross zero.  Overlapping kernels are merged by summing CDFs.
        """
        if width <= 0:
            raise ValueError("smoothing width must be positive")
        lefts = [max(0.0, v - width / 2) for v, _ in self.points]
        breaks = sorted(set(lefts) | {a + width for a in lefts})
        xs = np.array(breaks)
        cdf = np.zeros_like(xs)
        for a, (_, p) in zip(lefts, self.points):
            cdf += p * np.clip((xs - a) / width, 0.0, 1.0)
        cdf[-1] = 1.0
        return PiecewiseLinearCdf(tuple(zip(xs.tolist(), cdf.tolist())))


@dataclass(frozen=True)
class Floored(_Law):
    """Mixture ``(1 - weight) * base + weight * Uniform(lo, hi)``.

    Gives every item positive density on the joint support hull, which makes
    the common threshold strictly decreasing and continuous.
    """

    base: object
    weight: float
    lo: float
    hi: float

    @property
    def support(self):
        blo, bhi = self.base.support
        return (min(blo, self.lo), max(bhi, self.hi))

    def _u(self, x):
        return np.clip((_as_array(x) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def cdf(self, x):
        return (1 - self.weight) * self.base.cdf(x) + self.weight * self._u(x)

    def sf(self, x):
        return (1 - self.weight) * self.base.sf(x) + self.weight * (1.0 - self._u(x))

    def mean(self) -> float:
        return (1 - self.weight) * self.base.mean() + self.weight * 0.5 * (self.lo + self.hi)

    def sample(self, rng, size):
        out = self.base.sample(rng, size)
        mix = rng.uniform(0.0, 1.0, size) < self.weight
        out[mix] = rng.uniform(self.lo, self.hi, int(mix.sum()))
        return out


ValueDistribution = Union[Uniform, Power, PiecewiseLinearCdf, FiniteSupport, Floored]


@dataclass(frozen=True, eq=False)
class Instance:
    """An ordered collection of n >= 2 independent value distributions.

    ``smoothing_width`` (value units) continuizes finite supports; ``None``
    means 1e-6 of the joint support span.  ``floor_weight`` mixes each item
    with a uniform law on the joint support hull.
    """

    items: tuple
    smoothing_width: Optional[float] = None
    floor_weight: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if len(self.items) < 2:
            raise ValueError("an instance needs n >= 2 items")
        if self.smoothing_width is not None and self.smoothing_width < 0:
            raise ValueError("smoothing_width must be non-negative")
        if not 0.0 <= self.floor_weight < 1.0:
            raise ValueError("floor_weight must lie in [0, 1)")

    @property
    def n(self) -> int:
        return len(self.items)

    @cached_property
    def width(self) -> float:
        if self.smoothing_width is not None:
            return self.smoothing_width
        lo = min(d.support[0] for d in self.items)
        hi = max(d.support[1] for d in self.items)
        return DEFAULT_SMOOTHING_FRACTION * max(hi - lo, 1.0)

    @cached_property
    def effective(self) -> tuple:
        """The continuized laws actually used by every computation."""
        cont = []
        for d in self.items:
            if isinstance(d, FiniteSupport):
                if self.width <= 0:
                    raise ValueError("finite supports need a positive smoothing width")
                d = d.smoothed(self.width)
            cont.append(d)
        if self.floor_weight > 0:
            lo = min(d.support[0] for d in cont)
            hi = max(d.support[1] for d in cont)
            cont = [Floored(d, self.floor_weight, lo, hi) for d in cont]
        return tuple(cont)

    @cached_property
    def groups(self) -> tuple:
        """``(law, item_indices)`` for each distinct effective law."""
        index: dict = {}
        for i, d in enumerate(self.effective):
            index.setdefault(d, []).append(i)
        return tuple((d, tuple(ix)) for d, ix in index.items())

    @cached_property
    def group_of(self) -> np.ndarray:
        out = np.empty(self.n, dtype=int)
        for g, (_, ix) in enumerate(self.groups):
            out[list(ix)] = g
        return out

    @cached_property
    def multiplicity(self) -> np.ndarray:
        return np.array([len(ix) for _, ix in self.groups], dtype=float)

    @property
    def support(self) -> tuple[float, float]:
        return (min(d.support[0] for d in self.effective),
                max(d.support[1] for d in self.effective))

    def log_cdfs(self, x: np.ndarray) -> np.ndarray:
        """Group-wise log-CDF, shape ``(groups, len(x))``."""
        x = np.atleast_1d(_as_array(x))
        return np.stack([d.logcdf(x) for d, _ in self.groups])

    def log_max_cdf(self, x: np.ndarray) -> np.ndarray:
        lf = self.log_cdfs(x)
        return _weighted_logsum(lf, self.multiplicity)

    # -- serialization -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "items": [distribution_to_dict(d) for d in self.items],
            "smoothing_width": self.smoothing_width,
            "floor_weight": self.floor_weight,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        items = []
        for spec in data["items"]:
            d = distribution_from_dict(spec)
            items.extend([d] * int(spec.get("copies", 1)))
        return cls(tuple(items), data.get("smoothing_width"), float(data.get("floor_weight", 0.0)))


def _weighted_logsum(lf: np.ndarray, mult: np.ndarray) -> np.ndarray:
    """Sum of ``mult[g] * lf[g]`` with ``0 * -inf`` treated as 0."""
    finite = np.isfinite(lf)
    total = np.where(finite, lf, 0.0).T @ mult
    zeros = (~finite).T @ mult
    return np.where(zeros > 0, -np.inf, total)


def distribution_to_dict(d) -> dict:
    if isinstance(d, Uniform):
        return {"kind": "uniform", "params": {"lo": d.lo, "hi": d.hi}}
    if isinstance(d, Power):
        return {"kind": "power", "params": {"lo": d.lo, "hi": d.hi, "exponent": d.exponent}}
    if isinstance(d, PiecewiseLinearCdf):
        return {"kind": "piecewise_linear_cdf", "params": {"knots": [list(k) for k in d.knots]}}
    if isinstance(d, FiniteSupport):
        return {"kind": "finite_support", "params": {"points": [list(p) for p in d.points]}}
    raise TypeError(f"cannot serialize {type(d).__name__}")


def distribution_from_dict(spec: dict):
    kind = spec["kind"]
    params = spec.get("params", {})
    if kind == "uniform":
        return Uniform(float(params["lo"]), float(params["hi"]))
    if kind == "power":
        return Power(float(params["hi"]), float(params["exponent"]), float(params.get("lo", 0.0)))
    if kind == "piecewise_linear_cdf":
        return PiecewiseLinearCdf(tuple(tuple(k) for k in params["knots"]))
    if kind == "finite_support":
        return FiniteSupport(tuple(tuple(p) for p in params["points"]))
    raise ValueError(f"unknown distribution kind {kind!r}")


def load_instance(path: Union[str, Path]) -> Instance:
    with open(path) as fh:
        return Instance.from_dict(json.load(fh))


def pt_hard_instance(N: int = 1000, alpha: float = 0.2109, floor_weight: float = 1e-9) -> Instance:
    """N IID items whose maximum is Uniform(0, 1), plus one Uniform(alpha, alpha + 1/N).

    The narrow item is placed first.  A small floor keeps the joint support
    contiguous so that the threshold runs all the way down to 0.
    """
    narrow = Uniform(alpha, alpha + 1.0 / N)
    iid = Power(1.0, 1.0 / N)
    return Instance((narrow,) + (iid,) * N, floor_weight=floor_weight)


# ---------------------------------------------------------------------------
# Time grid


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Sorted nodes on [0, 1] carried as pairs ``(t, s = 1 - t)``.

    ``s`` is stored separately so nodes can be packed geometrically towards
    t = 1 below double-precision resolution of ``t`` itself.
    """

    t: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(self.t, dtype=np.float64)
        s = np.ascontiguousarray(self.s, dtype=np.float64)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "s", s)
        if t.shape != s.shape or t.ndim != 1 or t.size < 2:
            raise ValueError("t and s must be 1-D arrays of equal length >= 2")
        if t[0] != 0.0 or s[-1] != 0.0:
            raise ValueError("grid must start at t = 0 and end at t = 1")
        if np.any(np.diff(t) < 0) or np.any(np.diff(s) >= 0):
            raise ValueError("grid nodes must be strictly increasing")

    @property
    def m(self) -> int:
        return self.t.size

    @cached_property
    def dt(self) -> np.ndarray:
        """Cell widths, taken from whichever coordinate is better resolved."""
        upper = self.t[:-1] >= 0.5
        return np.where(upper, self.s[:-1] - self.s[1:], self.t[1:] - self.t[:-1])

    @classmethod
    def from_nodes(cls, t: Sequence[float]) -> "TimeGrid":
        t = np.asarray(t, dtype=np.float64)
        return cls(t, 1.0 - t)

    @classmethod
    def uniform(cls, m: int = 4096, head_decades: int = 12, tail_decades: int = 30,
                per_decade: int = 64) -> "TimeGrid":
        """``m`` uniform nodes plus geometric refinement near both endpoints.

        The geometric part takes over where its relative spacing
        ``10 ** (1 / per_decade) - 1`` beats the uniform step, so the relative
        cell width never exceeds that ratio near either endpoint.
        """
        if m < 3:
            raise ValueError("need at least 3 uniform nodes")
        h = 1.0 / (m - 1)
        switch = min(h / (10.0 ** (1.0 / per_decade) - 1.0), 0.25)
        hi_exp = math.log10(switch)

        def refine(decades):
            if decades <= 0 or -decades >= hi_exp:
                return np.array([]), 0.0
            return np.logspace(-decades, hi_exp, int((hi_exp + decades) * per_decade) + 1)[:-1], switch

        head, a = refine(head_decades)
        tail, b = refine(tail_decades)
        n_uni = max(int(round((1.0 - a - b) / h)), 2)
        k = np.arange(n_uni + 1)
        t_uni = a + (1.0 - a - b) * k / n_uni
        s_uni = b + (1.0 - a - b) * (n_uni - k) / n_uni
        if a == 0.0:
            t_uni, s_uni = t_uni[1:], s_uni[1:]
        if b == 0.0:
            t_uni, s_uni = t_uni[:-1], s_uni[:-1]
        t = np.concatenate([[0.0], head, t_uni, 1.0 - tail[::-1], [1.0]])
        s = np.concatenate([[1.0], 1.0 - head, s_uni, tail[::-1], [0.0]])
        return cls(t, s)


# ---------------------------------------------------------------------------
# Threshold and level functions


def _others_logsum(lf: np.ndarray, mult: np.ndarray) -> np.ndarray:
    """For each group g: log of the product of CDFs of all items except one copy of g."""
    finite = np.isfinite(lf)
    vals = np.where(finite, lf, 0.0)
    total = vals.T @ mult
    zeros = (~finite).T @ mult
    others = total[None, :] - vals
    others_zero = zeros[None, :] - (~finite)
    return np.where(others_zero > 0, -np.inf, others)


def max_exceed_prob(inst: Instance, x: ArrayLike, exclude: Optional[int] = None) -> ArrayLike:
    """P[max_{j != exclude} v_j > x]."""
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(_as_array(x))
    if np.any(xs < 0):
        raise ValueError("x must be non-negative")
    lf = inst.log_cdfs(xs)
    mult = inst.multiplicity.copy()
    if exclude is not None:
        mult[inst.group_of[exclude]] -= 1
    out = -np.expm1(_weighted_logsum(lf, mult))
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if scalar else out


def _invert_levels(inst: Instance, t: np.ndarray, s: np.ndarray, mult: np.ndarray,
                   lo: float, hi: float, iterations: int = 200) -> np.ndarray:
    """Vectorized bisection for x with P[max > x] = t, i.e. prod F(x) = s.

    Uses log F for small s and the survival form for small t, so that both
    tails keep relative precision.
    """
    a = np.full(t.shape, lo)
    b = np.full(t.shape, hi)
    small_s = s <= 0.5
    with np.errstate(divide="ignore"):
        log_s = np.log(s)
    for _ in range(iterations):
        mid = 0.5 * (a + b)
        lmax = _weighted_logsum(np.stack([d.logcdf(mid) for d, _ in inst.groups]), mult)
        below = np.where(small_s, lmax < log_s, -np.expm1(lmax) > t)
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
        if np.all(b - a <= np.finfo(float).eps * np.maximum(np.abs(mid), 1e-300)):
            break
    return 0.5 * (a + b)


def _max_floor(inst: Instance, mult: np.ndarray) -> float:
    """Lower end of the support of the max, the continuous limit of tau as t -> 1."""
    return max(float(d.support[0]) for (d, _), m in zip(inst.groups, mult) if m > 0)


def _check_flat(inst: Instance, tau: np.ndarray, t: np.ndarray, s: np.ndarray,
                mult: np.ndarray, flat_width: float) -> None:
    """Raise NonInvertible where the level set {F_max = s} is wider than ``flat_width``.

    The width is measured between the thresholds of the perturbed levels
    s -+ tol_prob * min(s, t), so a plateau of the max-CDF is caught even when
    bisection lands on one of its edges.
    """
    interior = (t > 0) & (s > 0)
    if not np.any(interior):
        return
    ti, si = t[interior], s[interior]
    d = TOL_PROB * np.minimum(si, ti)
    lo, hi = inst.support
    below = _invert_levels(inst, ti + d, si - d, mult, lo, hi)
    above = _invert_levels(inst, ti - d, si + d, mult, lo, hi)
    flat = (above - below) > flat_width
    if np.any(flat):
        bad = float(ti[np.argmax(flat)])
        raise NonInvertible(
            f"max-CDF is flat around level t={bad:.6g}; increase smoothing_width or floor_weight")


def threshold_tau(inst: Instance, t: float, flat_width: Optional[float] = None) -> float:
    """The value tau with P[max_i v_i > tau] = t."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    lo, hi = inst.support
    if t == 0.0:
        return hi
    if t == 1.0:
        return _max_floor(inst, inst.multiplicity)
    tt = np.array([t])
    ss = np.array([1.0 - t])
    tau = _invert_levels(inst, tt, ss, inst.multiplicity, lo, hi)
    if flat_width is None:
        flat_width = 1e-6 * (hi - lo)
    _check_flat(inst, tau, tt, ss, inst.multiplicity, flat_width)
    return float(tau[0])


def threshold_for_others(inst: Instance, item: int, level: np.ndarray,
                         level_c: Optional[np.ndarray] = None) -> np.ndarray:
    """Values x with P[max_{j != item} v_j > x] = level (vectorized)."""
    level = np.asarray(level, dtype=np.float64)
    level_c = 1.0 - level if level_c is None else np.asarray(level_c, dtype=np.float64)
    mult = inst.multiplicity.copy()
    mult[inst.group_of[item]] -= 1
    lo, hi = inst.support
    out = _invert_levels(inst, level, level_c, mult, lo, hi)
    out = np.where(level <= 0.0, hi, out)
    return np.where(level_c <= 0.0, _max_floor(inst, mult), out)


@dataclass(frozen=True, eq=False)
class LevelTables:
    """p_i(t), q_i(t) and their complements on a grid, stored per group.

    ``pc = 1 - p`` and ``qc = 1 - q`` are carried explicitly because near
    t = 1 they are the well-resolved quantities.
    """

    grid: TimeGrid
    tau: np.ndarray
    p: np.ndarray
    pc: np.ndarray
    q: np.ndarray
    qc: np.ndarray
    group_of: np.ndarray
    multiplicity: np.ndarray

    def item(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        g = self.group_of[i]
        return self.p[g], self.q[g]

    def identity_residual(self) -> float:
        """max |(1 - p_i)(1 - q_i) - (1 - t)| over nodes and groups."""
        return float(np.max(np.abs(self.pc * self.qc - self.grid.s[None, :])))


def level_functions(inst: Instance, grid: Optional[TimeGrid] = None,
                    flat_width: Optional[float] = None) -> LevelTables:
    """Tabulate the common threshold and the level functions on ``grid``."""
    grid = grid or TimeGrid.uniform()
    lo, hi = inst.support
    tau = _invert_levels(inst, grid.t, grid.s, inst.multiplicity, lo, hi)
    tau[0] = hi
    tau[-1] = _max_floor(inst, inst.multiplicity)
    if flat_width is None:
        flat_width = 1e-6 * (hi - lo)
    _check_flat(inst, tau, grid.t, grid.s, inst.multiplicity, flat_width)
    lf = inst.log_cdfs(tau)
    others = _others_logsum(lf, inst.multiplicity)
    p = np.stack([d.sf(tau) for d, _ in inst.groups])
    pc = np.exp(lf)
    qc = np.exp(others)
    q = -np.expm1(others)
    # pin the endpoints to their exact values
    p[:, 0] = 0.0
    q[:, 0] = 0.0
    pc[:, 0] = 1.0
    qc[:, 0] = 1.0
    return LevelTables(grid, tau, p, pc, q, qc, inst.group_of, inst.multiplicity)

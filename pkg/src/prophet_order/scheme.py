"""Independent-arrival-time schemes: Scheme I, the per-item threshold
framework, and the 2-scheme algorithm with its h-warped Scheme II.

All integrals are Stieltjes sums over the grid cells (increments of q rather
than tabulated derivatives), and the exponential factor in the arrival
density is integrated exactly on each cell under a piecewise-constant p.
This keeps the product identity prod_i (1 - int p_i f_i) = g exact up to the
cell-wise quadrature of g itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .distributions import (
    TOL_PROB,
    Instance,
    LevelTables,
    TimeGrid,
    _others_logsum,
    level_functions,
    threshold_for_others,
)
from .errors import BothSchemesFailed, DegenerateScheme

GAMMA_STAR = 0.7258
WELL_DEFINED_SLACK = 1e-6


@dataclass(frozen=True, eq=False)
class SchemeParams:
    gamma: float = GAMMA_STAR
    c: float = 0.28
    epsilon: float = 1e-4
    grid: TimeGrid = field(default_factory=TimeGrid.uniform)
    slack: float = WELL_DEFINED_SLACK

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if not 0.0 < self.epsilon < self.c < 1.0:
            raise ValueError("need 0 < epsilon < c < 1")
        if self.slack < 0:
            raise ValueError("slack must be non-negative")


def h_fn(x, c: float = 0.28, epsilon: float = 1e-4):
    """Three-piece increasing map of [0, 1] onto itself with h(epsilon) = c - epsilon."""
    if not 0.0 < epsilon < c < 1.0:
        raise ValueError("need 0 < epsilon < c < 1")
    x = np.asarray(x, dtype=np.float64)
    if np.any((x < 0) | (x > 1)):
        raise ValueError("x must lie in [0, 1]")
    out = np.where(
        x < epsilon,
        (c - epsilon) / epsilon * x,
        np.where(x < c, c + epsilon * (x - c) / (c - epsilon), x),
    )
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Schedules and laws


@dataclass(frozen=True, eq=False)
class ThresholdSchedule:
    """Per-item thresholds on a grid: a common table plus per-item overrides."""

    grid: TimeGrid
    common: np.ndarray
    overrides: dict = field(default_factory=dict)

    @property
    def is_common(self) -> bool:
        return not self.overrides

    def tau_of(self, item: int) -> np.ndarray:
        return self.overrides.get(item, self.common)


@dataclass(frozen=True, eq=False)
class ArrivalLaw:
    """Arrival-time law: density and cumulative tables on the grid plus an atom at t = 1."""

    grid: TimeGrid
    density: np.ndarray
    cdf: np.ndarray
    atom_at_one: float
    mass: float  # integral of the density over [0, 1), before clamping

    @property
    def well_defined(self) -> bool:
        return self.atom_at_one >= 0.0


@dataclass(frozen=True, eq=False)
class SlotTables:
    """Level functions grouped into slots of items sharing law and threshold."""

    grid: TimeGrid
    p: np.ndarray
    pc: np.ndarray
    q: np.ndarray
    qc: np.ndarray
    multiplicity: np.ndarray
    slot_of: np.ndarray  # item -> slot

    @classmethod
    def from_levels(cls, lv: LevelTables) -> "SlotTables":
        return cls(lv.grid, lv.p, lv.pc, lv.q, lv.qc, lv.multiplicity, lv.group_of)


@dataclass(frozen=True, eq=False)
class SchemeResult:
    """Output of a density build: per-slot laws, the survival table, and diagnostics."""

    slots: SlotTables
    g: np.ndarray
    laws: tuple  # one ArrivalLaw per slot
    integrals: np.ndarray  # per item

    def law_of(self, item: int) -> ArrivalLaw:
        return self.laws[self.slots.slot_of[item]]

    @property
    def well_defined(self) -> bool:
        return all(l.well_defined for l in self.laws)


def _stieltjes(p: np.ndarray, qc: np.ndarray) -> np.ndarray:
    """Cell-wise trapezoid of p dq with dq = -(qc increment); shape (..., m-1)."""
    dq = qc[..., :-1] - qc[..., 1:]
    return 0.5 * (p[..., :-1] + p[..., 1:]) * dq


def _phi1(x: np.ndarray) -> np.ndarray:
    """(1 - exp(-x)) / x with the removable singularity at 0."""
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - 0.5 * x, -np.expm1(-safe) / safe)


def _derivative(grid: TimeGrid, q: np.ndarray, qc: np.ndarray) -> np.ndarray:
    """Central differences of q in t, using s = 1 - t on the upper half."""
    k = int(np.searchsorted(grid.t, 0.5))
    out = np.empty_like(q)
    out[..., :k] = np.gradient(q[..., : k + 1], grid.t[: k + 1], axis=-1)[..., :k]
    out[..., k:] = np.gradient(qc[..., k - 1:], grid.s[k - 1:], axis=-1)[..., 1:]
    return out


def g_fn(levels: LevelTables, gamma: float) -> np.ndarray:
    """Algebraic survival table Gamma * (sum_i (1 - q_i) p_i - t) + 1."""
    tot = (levels.qc * levels.p).T @ levels.multiplicity
    g = gamma * (tot - levels.grid.t) + 1.0
    g[0] = 1.0
    return g


def g_integral(slots: SlotTables, gamma: float) -> np.ndarray:
    """Integral form 1 - Gamma * sum_i int_0^t p_i dq_i."""
    cells = _stieltjes(slots.p, slots.qc).T @ slots.multiplicity
    return 1.0 - gamma * np.concatenate([[0.0], np.cumsum(cells)])


def _check_g(g: np.ndarray) -> None:
    if np.any(g[:-1] <= 0):
        k = int(np.argmax(g[:-1] <= 0))
        raise DegenerateScheme(f"g reached {g[k]:.3g} at node {k} before t = 1")


def _laws(slots: SlotTables, g: np.ndarray, gamma: float, slack: float) -> SchemeResult:
    _check_g(g)
    grid = slots.grid
    g_mid = 0.5 * (g[:-1] + g[1:])
    g_mid = np.where(g_mid > 0, g_mid, g[:-1])
    dq = slots.qc[:, :-1] - slots.qc[:, 1:]
    p_mid = 0.5 * (slots.p[:, :-1] + slots.p[:, 1:])
    dphi = gamma * p_mid * dq / g_mid
    phi = np.concatenate([np.zeros((dq.shape[0], 1)), np.cumsum(dphi, axis=1)], axis=1)
    dF = np.exp(-phi[:, :-1]) * gamma * dq / g_mid * _phi1(dphi)
    F = np.concatenate([np.zeros((dq.shape[0], 1)), np.cumsum(dF, axis=1)], axis=1)
    g_safe = np.where(g > 0, g, np.inf)
    dens = gamma * _derivative(grid, slots.q, slots.qc) / g_safe * np.exp(-phi)
    laws = []
    for k in range(dq.shape[0]):
        mass = float(F[k, -1])
        atom = 1.0 - mass
        if -slack <= atom < 0:
            atom = 0.0
        laws.append(ArrivalLaw(grid, dens[k], F[k], atom, mass))
    integrals = np.array([laws[s].mass for s in slots.slot_of])
    return SchemeResult(slots, g, tuple(laws), integrals)


def arrival_density_pt(inst: Instance, grid: Optional[TimeGrid] = None, gamma: float = GAMMA_STAR,
                       levels: Optional[LevelTables] = None,
                       slack: float = WELL_DEFINED_SLACK) -> SchemeResult:
    """Scheme I arrival laws built from the common threshold.

    The survival table is the integral form of g, which is exactly what the
    discretized densities integrate to; :func:`g_fn` gives the algebraic form
    as an independent cross-check.
    """
    levels = levels or level_functions(inst, grid)
    slots = SlotTables.from_levels(levels)
    return _laws(slots, g_integral(slots, gamma), gamma, slack)


def common_schedule(inst: Instance, grid: Optional[TimeGrid] = None,
                    levels: Optional[LevelTables] = None) -> ThresholdSchedule:
    levels = levels or level_functions(inst, grid)
    return ThresholdSchedule(levels.grid, levels.tau)


def schedule_tables(inst: Instance, schedule: ThresholdSchedule) -> SlotTables:
    """Evaluate p-bar and q-bar for every item under a per-item schedule."""
    grid = schedule.grid
    mult = inst.multiplicity
    # slot key: (group, overridden item or None)
    keys: dict = {}
    slot_of = np.empty(inst.n, dtype=int)
    for i in range(inst.n):
        key = (int(inst.group_of[i]), i if i in schedule.overrides else None)
        slot_of[i] = keys.setdefault(key, len(keys))
    slot_mult = np.bincount(slot_of, minlength=len(keys)).astype(float)
    p, pc, q, qc = [], [], [], []
    for (grp, item), _ in sorted(keys.items(), key=lambda kv: kv[1]):
        tau = schedule.common if item is None else schedule.overrides[item]
        law = inst.groups[grp][0]
        lf = inst.log_cdfs(tau)
        others = _others_logsum(lf, mult)[grp]
        p.append(law.sf(tau))
        pc.append(np.exp(lf[grp]))
        qc.append(np.exp(others))
        q.append(-np.expm1(others))
    arr = [np.stack(a) for a in (p, pc, q, qc)]
    for a, v in zip(arr, (0.0, 1.0, 0.0, 1.0)):
        a[:, 0] = v
    return SlotTables(grid, *arr, slot_mult, slot_of)


def arrival_density_general(inst: Instance, schedule: ThresholdSchedule, gamma: float = GAMMA_STAR,
                            slack: float = WELL_DEFINED_SLACK) -> SchemeResult:
    """Per-item-threshold framework with g-bar in its integral form."""
    slots = schedule_tables(inst, schedule)
    return _laws(slots, g_integral(slots, gamma), gamma, slack)


def survival_product(result: SchemeResult) -> np.ndarray:
    """prod_i (1 - int_0^t p_i f_i) evaluated from the cumulative law tables."""
    slots = result.slots
    logs = []
    for k, law in enumerate(result.laws):
        dF = np.diff(law.cdf)
        acc = np.concatenate([[0.0], np.cumsum(0.5 * (slots.p[k, :-1] + slots.p[k, 1:]) * dF)])
        logs.append(np.log1p(-np.minimum(acc, 1.0)))
    return np.exp(np.stack(logs).T @ slots.multiplicity)


# ---------------------------------------------------------------------------
# 2-scheme algorithm


def scheme_two_schedule(inst: Instance, params: SchemeParams, adverse_item: int,
                        levels: Optional[LevelTables] = None) -> ThresholdSchedule:
    """Scheme II: the adverse item's threshold targets others' exceedance h(q(t))."""
    levels = levels or level_functions(inst, params.grid)
    _, q = levels.item(adverse_item)
    qc = levels.qc[levels.group_of[adverse_item]]
    hq = h_fn(np.clip(q, 0.0, 1.0), params.c, params.epsilon)
    hqc = np.where(q >= params.c, qc, 1.0 - hq)
    tau1 = threshold_for_others(inst, adverse_item, hq, hqc)
    return ThresholdSchedule(levels.grid, levels.tau, {adverse_item: tau1})


@dataclass(frozen=True, eq=False)
class BuiltScheme:
    params: SchemeParams
    schedule: ThresholdSchedule
    result: SchemeResult
    scheme_id: str  # "SchemeI" or "SchemeII"
    adverse_item: Optional[int]
    scheme_one_integrals: np.ndarray

    @property
    def laws(self) -> list:
        return [self.result.law_of(i) for i in range(self.result.slots.slot_of.size)]

    @property
    def integrals(self) -> np.ndarray:
        return self.result.integrals

    @property
    def surjective(self) -> bool:
        """Whether every p-bar and q-bar reaches 1 at t = 1 (within 1e-6).

        The ASD guarantee presumes this; instances whose item supports do not
        overlap fail it unless a floor weight is added.
        """
        slots = self.result.slots
        return bool(np.all(slots.p[:, -1] >= 1 - 1e-6) and np.all(slots.q[:, -1] >= 1 - 1e-6))


def adverse_items(result: SchemeResult, slack: float = WELL_DEFINED_SLACK) -> list:
    return [int(i) for i in np.flatnonzero(result.integrals > 1.0 + slack)]


def build_two_scheme(inst: Instance, params: Optional[SchemeParams] = None) -> BuiltScheme:
    """Run Scheme I; if an item is adverse, reroute it through Scheme II."""
    params = params or SchemeParams()
    levels = level_functions(inst, params.grid)
    first = arrival_density_pt(inst, levels=levels, gamma=params.gamma, slack=params.slack)
    bad = adverse_items(first, params.slack)
    if not bad:
        return BuiltScheme(params, common_schedule(inst, levels=levels), first, "SchemeI", None,
                           first.integrals)
    adverse = bad[0]
    schedule = scheme_two_schedule(inst, params, adverse, levels)
    try:
        second = arrival_density_general(inst, schedule, params.gamma, params.slack)
    except DegenerateScheme as exc:
        raise BothSchemesFailed(f"Scheme II degenerate: {exc}") from exc
    if not second.well_defined:
        worst = float(second.integrals.max())
        raise BothSchemesFailed(
            f"adverse items {bad}; Scheme II still has an arrival mass of {worst:.8f} > 1")
    return BuiltScheme(params, schedule, second, "SchemeII", adverse, first.integrals)


# ---------------------------------------------------------------------------
# Weak adverseness


def arrival_mass_functional(x: np.ndarray, xc: np.ndarray, p: np.ndarray, rho: np.ndarray,
                            gamma: float) -> float:
    """int_0^1 Gamma / rho(x) * exp(-Gamma int_0^x p / rho) dx on a tabulated x-grid.

    ``xc = 1 - x`` is passed separately for resolution near x = 1.
    """
    dx = xc[:-1] - xc[1:]
    r_mid = 0.5 * (rho[:-1] + rho[1:])
    p_mid = 0.5 * (p[:-1] + p[1:])
    dpsi = gamma * p_mid * dx / r_mid
    psi = np.concatenate([[0.0], np.cumsum(dpsi)])
    return float(np.sum(np.exp(-psi[:-1]) * gamma * dx / r_mid * _phi1(dpsi)))


def p_tilde(levels: LevelTables, item: int):
    """(x, 1 - x, p~(x)) with x = q_i(t), tabulated along the grid."""
    g = levels.group_of[item]
    return levels.q[g], levels.qc[g], levels.p[g]


def g_hat(x: np.ndarray, xc: np.ndarray, pt: np.ndarray, gamma: float) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        ell = np.where(xc > 0, -xc * np.log(xc), 0.0)
    return gamma * (ell * (1.0 - pt) - x) + 1.0


@dataclass(frozen=True)
class WeakAdverseReport:
    item: int
    gamma: float
    G_hat: float
    is_weakly_adverse: bool


def weakly_adverse_check(inst: Instance, item: int, gamma: float = GAMMA_STAR,
                         grid: Optional[TimeGrid] = None,
                         levels: Optional[LevelTables] = None) -> WeakAdverseReport:
    """Evaluate G-hat_i(0, Gamma) by quadrature in x = q_i(t)."""
    levels = levels or level_functions(inst, grid)
    x, xc, pt = p_tilde(levels, item)
    val = arrival_mass_functional(x, xc, pt, g_hat(x, xc, pt, gamma), gamma)
    return WeakAdverseReport(item, gamma, val, val > 1.0)

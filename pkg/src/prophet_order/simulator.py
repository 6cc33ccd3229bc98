"""Seeded Monte-Carlo execution of a built scheme.

Trials are split into fixed-size chunks.  Chunk ``c`` draws from
``numpy.random.default_rng(SeedSequence(seed).spawn(n_chunks)[c])``, so the
report depends only on (seed, trials, chunk size) and never on the number of
worker threads.  Chunk results are reduced in chunk order.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .distributions import Instance
from .scheme import BuiltScheme

Z95 = 1.959963984540054
DEFAULT_CELLS_PER_CHUNK = 1 << 18


@dataclass(frozen=True)
class SimulationConfig:
    trials: int
    seed: int = 0
    x_grid: tuple = ()
    workers: int = 1
    chunk_trials: Optional[int] = None  # default: about 2**18 item-draws per chunk

    def __post_init__(self):
        object.__setattr__(self, "trials", int(self.trials))
        object.__setattr__(self, "x_grid", tuple(float(x) for x in self.x_grid))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(b < a for a, b in zip(self.x_grid, self.x_grid[1:])):
            raise ValueError("x_grid must be sorted")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def chunk_size(self, n_items: int) -> int:
        if self.chunk_trials is not None:
            return max(1, int(self.chunk_trials))
        return max(1, DEFAULT_CELLS_PER_CHUNK // max(n_items, 1))


def default_workers() -> int:
    return max(1, int(os.environ.get("PROPHET_ORDER_WORKERS", "1")))


@dataclass
class _Tally:
    """Additive sufficient statistics for one chunk."""

    n: int
    gt_alg: np.ndarray
    gt_max: np.ndarray
    diff_sum: np.ndarray
    diff_sq: np.ndarray
    alg_sum: float
    alg_sq: float
    max_sum: float
    max_sq: float
    gap_sum: float
    gap_sq: float
    accepted: np.ndarray

    def __add__(self, o: "_Tally") -> "_Tally":
        return _Tally(self.n + o.n, self.gt_alg + o.gt_alg, self.gt_max + o.gt_max,
                      self.diff_sum + o.diff_sum, self.diff_sq + o.diff_sq,
                      self.alg_sum + o.alg_sum, self.alg_sq + o.alg_sq,
                      self.max_sum + o.max_sum, self.max_sq + o.max_sq,
                      self.gap_sum + o.gap_sum, self.gap_sq + o.gap_sq,
                      self.accepted + o.accepted)


@dataclass
class SimulationReport:
    x_grid: list
    p_alg: list
    p_max: list
    ratio: list  # None where P[max > x] is estimated as 0
    ci_alg: list
    ci_max: list
    asd_gap: list  # P[ALG > x] - Gamma P[max > x]
    ci_gap: list
    e_alg: float
    e_max: float
    ci_e_alg: float
    ci_e_max: float
    competitive_gap: float  # E[ALG] - Gamma E[max]
    ci_competitive_gap: float
    accept_prob: list
    ci_accept: list
    accept_counts: list
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "p_alg", "p_max", "ratio", "ci_alg", "ci_max", "asd_gap", "ci_gap"])
            for row in zip(self.x_grid, self.p_alg, self.p_max, self.ratio, self.ci_alg,
                           self.ci_max, self.asd_gap, self.ci_gap):
                w.writerow(["" if v is None else v for v in row])


class _Sampler:
    """Precomputed per-item tables for vectorized trials."""

    def __init__(self, inst: Instance, scheme: BuiltScheme):
        res = scheme.result
        self.inst = inst
        self.n = inst.n
        self.gamma = scheme.params.gamma
        self.grid = res.slots.grid
        self.slot_of = res.slots.slot_of
        self.laws = res.laws
        self.taus = [scheme.schedule.tau_of(i) for i in range(self.n)]
        # items batched by (slot, threshold table identity) so draws vectorize
        keys: dict = {}
        for i in range(self.n):
            keys.setdefault((int(self.slot_of[i]), id(self.taus[i])), []).append(i)
        self.batches = [(slot, np.array(ix)) for (slot, _), ix in keys.items()]
        self.value_batches = [(law, np.array(ix)) for law, ix in inst.groups]

    def arrival_index(self, slot: int, u: np.ndarray) -> np.ndarray:
        """Fractional grid index of the arrival time; inf for the atom at t = 1."""
        law = self.laws[slot]
        F = law.cdf
        k = np.searchsorted(F, u, side="right") - 1
        k = np.clip(k, 0, F.size - 2)
        lo, hi = F[k], F[k + 1]
        w = np.where(hi > lo, (u - lo) / np.where(hi > lo, hi - lo, 1.0), 0.0)
        idx = k + np.clip(w, 0.0, 1.0)
        at_one = (u >= F[-1]) | (idx >= F.size - 1)
        return np.where(at_one, np.inf, idx)

    def threshold_at(self, item_tau: np.ndarray, idx: np.ndarray) -> np.ndarray:
        finite = np.isfinite(idx)
        safe = np.where(finite, idx, 0.0)
        k = np.minimum(safe.astype(int), item_tau.size - 2)
        w = safe - k
        thr = item_tau[k] + w * (item_tau[k + 1] - item_tau[k])
        return np.where(finite, thr, np.inf)

    def play(self, rng: np.random.Generator, B: int):
        """Return (reward, max value, accepted item or -1) for B trials."""
        n = self.n
        values = np.empty((n, B))
        for law, ix in self.value_batches:
            values[ix] = law.sample(rng, (ix.size, B))
        arrival = np.empty((n, B))
        thr = np.empty((n, B))
        for slot, ix in self.batches:
            idx = self.arrival_index(slot, rng.uniform(0.0, 1.0, (ix.size, B)))
            arrival[ix] = idx
            thr[ix] = self.threshold_at(self.taus[ix[0]], idx)
        accept = values > thr
        key = np.where(accept, arrival, np.inf)
        first = np.argmin(key, axis=0)  # ties go to the lower item index
        cols = np.arange(B)
        hit = np.isfinite(key[first, cols])
        reward = np.where(hit, values[first, cols], 0.0)
        return reward, values.max(axis=0), np.where(hit, first, -1)


def run_game(inst: Instance, scheme: BuiltScheme, rng: np.random.Generator,
             values: Optional[Sequence[float]] = None,
             arrival_times: Optional[Sequence[float]] = None) -> dict:
    """Play one trial; optionally force the values and/or arrival times."""
    s = _Sampler(inst, scheme)
    if values is None:
        vals = np.array([float(inst.effective[i].sample(rng, 1)[0]) for i in range(inst.n)])
    else:
        vals = np.asarray(values, dtype=float)
    grid = s.grid
    if arrival_times is None:
        idx = np.array([s.arrival_index(int(s.slot_of[i]), rng.uniform(0.0, 1.0, 1))[0]
                        for i in range(inst.n)])
    else:
        ts = np.asarray(arrival_times, dtype=float)
        pos = np.interp(ts, grid.t, np.arange(grid.m, dtype=float))
        idx = np.where(ts >= 1.0, np.inf, pos)
    thr = np.array([s.threshold_at(s.taus[i], idx[i:i + 1])[0] for i in range(inst.n)])
    order = sorted(range(inst.n), key=lambda i: (idx[i], i))
    for i in order:
        if np.isfinite(idx[i]) and vals[i] > thr[i]:
            return {"accepted_item": i, "reward": float(vals[i]), "max_value": float(vals.max())}
    return {"accepted_item": None, "reward": 0.0, "max_value": float(vals.max())}


def _chunk(sampler: _Sampler, seed_seq: np.random.SeedSequence, B: int, xs: np.ndarray) -> _Tally:
    rng = np.random.default_rng(seed_seq)
    reward, vmax, who = sampler.play(rng, B)
    a = reward[None, :] > xs[:, None]
    m = vmax[None, :] > xs[:, None]
    d = a.astype(float) - sampler.gamma * m
    gap = reward - sampler.gamma * vmax
    acc = np.bincount(who[who >= 0], minlength=sampler.n)
    return _Tally(B, a.sum(axis=1), m.sum(axis=1), d.sum(axis=1), (d * d).sum(axis=1),
                  float(reward.sum()), float((reward * reward).sum()),
                  float(vmax.sum()), float((vmax * vmax).sum()),
                  float(gap.sum()), float((gap * gap).sum()), acc)


def _half_width(s: float, sq: float, n: int) -> float:
    mean = s / n
    var = max(sq / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return Z95 * (var / n) ** 0.5


def estimate_asd(inst: Instance, scheme: BuiltScheme, config: SimulationConfig) -> SimulationReport:
    sampler = _Sampler(inst, scheme)
    B = config.chunk_size(inst.n)
    sizes = [B] * (config.trials // B)
    if config.trials % B:
        sizes.append(config.trials % B)
    seqs = np.random.SeedSequence(config.seed).spawn(len(sizes))
    xs = np.asarray(config.x_grid, dtype=float)
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            parts = list(pool.map(lambda a: _chunk(sampler, a[0], a[1], xs), zip(seqs, sizes)))
    else:
        parts = [_chunk(sampler, s, b, xs) for s, b in zip(seqs, sizes)]
    tot = parts[0]
    for p in parts[1:]:
        tot = tot + p
    T = tot.n
    p_alg = tot.gt_alg / T
    p_max = tot.gt_max / T
    ci = lambda p: Z95 * np.sqrt(p * (1 - p) / T)
    ratio = [None if pm == 0 else float(pa / pm) for pa, pm in zip(p_alg, p_max)]
    ci_gap = [_half_width(s, q, T) for s, q in zip(tot.diff_sum, tot.diff_sq)]
    acc = tot.accepted / T
    return SimulationReport(
        x_grid=list(map(float, xs)), p_alg=p_alg.tolist(), p_max=p_max.tolist(), ratio=ratio,
        ci_alg=ci(p_alg).tolist(), ci_max=ci(p_max).tolist(),
        asd_gap=(tot.diff_sum / T).tolist(), ci_gap=ci_gap,
        e_alg=tot.alg_sum / T, e_max=tot.max_sum / T,
        ci_e_alg=_half_width(tot.alg_sum, tot.alg_sq, T),
        ci_e_max=_half_width(tot.max_sum, tot.max_sq, T),
        competitive_gap=tot.gap_sum / T,
        ci_competitive_gap=_half_width(tot.gap_sum, tot.gap_sq, T),
        accept_prob=acc.tolist(), ci_accept=ci(acc).tolist(),
        accept_counts=tot.accepted.tolist(),
        metadata=dict(seed=config.seed, trials=T, chunk_trials=B, workers=config.workers,
                      scheme_id=scheme.scheme_id, gamma=scheme.params.gamma,
                      adverse_item=scheme.adverse_item, grid_nodes=sampler.grid.m,
                      confidence_z=Z95),
    )


def acceptance_probabilities(scheme: BuiltScheme) -> np.ndarray:
    """Direct quadrature of P[item i is accepted] = int p_i f_i prod_{j != i} (1 - int_0^t p_j f_j).

    Uses the tabulated arrival CDFs as Stieltjes measures.
    """
    res = scheme.result
    slots = res.slots
    n = slots.slot_of.size
    K = len(res.laws)
    dF = np.stack([np.diff(l.cdf) for l in res.laws])
    p_mid = 0.5 * (slots.p[:, :-1] + slots.p[:, 1:])
    cell = p_mid * dF
    used = np.concatenate([np.zeros((K, 1)), np.cumsum(cell, axis=1)], axis=1)
    surv = np.clip(1.0 - used, 1e-300, 1.0)
    logs = np.log(surv)
    total = logs.T @ slots.multiplicity
    out = np.empty(n)
    for i in range(n):
        k = slots.slot_of[i]
        others = np.exp(total - logs[k])
        # survival of the others at the cell midpoint
        o_mid = 0.5 * (others[:-1] + others[1:])
        out[i] = float(np.sum(cell[k] * o_mid))
    return out

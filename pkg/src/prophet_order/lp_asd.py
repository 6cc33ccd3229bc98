"""From competitiveness to approximate stochastic dominance on finite supports.

Deterministic order-selection algorithms are enumerated exhaustively, their
exceedance vectors P[A >= a_j] are computed exactly over all value profiles,
and the primal/dual pair of linear programs is solved in rational arithmetic.
The optimal dual weights give a randomized algorithm whose exceedance
dominates alpha* times that of the prophet.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .errors import CapExceeded, VerificationFailure
from .simplex import solve

INF = math.inf
DEFAULT_CAP = 100_000
SECRETARY_CAP = 5_000


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(str(v)) if isinstance(v, float) else Fraction(v)


@dataclass(frozen=True)
class FiniteInstance:
    """n items on a shared support 0 = a_1 < ... < a_k; ``probs[i][j]`` = P[X_i = a_j]."""

    support: tuple
    probs: tuple

    def __post_init__(self):
        sup = tuple(_frac(a) for a in self.support)
        probs = tuple(tuple(_frac(p) for p in row) for row in self.probs)
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "probs", probs)
        if not sup or sup[0] != 0:
            raise ValueError("the support must start at a_1 = 0")
        if any(b <= a for a, b in zip(sup, sup[1:])):
            raise ValueError("the support must be strictly increasing")
        if len(probs) < 1:
            raise ValueError("need at least one item")
        for row in probs:
            if len(row) != len(sup):
                raise ValueError("each item needs one probability per support point")
            if any(p < 0 for p in row) or sum(row) != 1:
                raise ValueError("item probabilities must be non-negative and sum to 1")

    @property
    def n(self) -> int:
        return len(self.probs)

    @property
    def k(self) -> int:
        return len(self.support)

    @classmethod
    def from_atoms(cls, items: Sequence[Sequence]) -> "FiniteInstance":
        """Build from per-item ``[(value, prob), ...]`` lists; 0 is added to the support."""
        vals = sorted({_frac(v) for item in items for v, _ in item} | {Fraction(0)})
        index = {v: j for j, v in enumerate(vals)}
        probs = []
        for item in items:
            row = [Fraction(0)] * len(vals)
            for v, p in item:
                row[index[_frac(v)]] += _frac(p)
            probs.append(tuple(row))
        return cls(tuple(vals), tuple(probs))

    def relabel(self, f) -> "FiniteInstance":
        return FiniteInstance(tuple(_frac(f(a)) for a in self.support), self.probs)

    def profiles(self):
        """Yield (index tuple, probability) over all value profiles with positive mass."""
        supports = [[j for j, p in enumerate(row) if p > 0] for row in self.probs]
        for combo in itertools.product(*supports):
            pr = Fraction(1)
            for i, j in enumerate(combo):
                pr *= self.probs[i][j]
            yield combo, pr

    def max_exceedance(self) -> tuple:
        """P[X >= a_j] for X = max_i X_i."""
        out = []
        for j in range(self.k):
            below = Fraction(1)
            for row in self.probs:
                below *= sum(row[:j], Fraction(0))
            out.append(1 - below)
        return tuple(out)

    def max_mean(self) -> Fraction:
        ex = self.max_exceedance()
        return sum(((self.support[j] - self.support[j - 1]) * ex[j] for j in range(1, self.k)), Fraction(0))


@dataclass(frozen=True)
class DeterministicAlgorithm:
    order: tuple  # order[r] = item inspected at step r
    thresholds: tuple  # support indices, or None for infinity
    exceedance: tuple = field(compare=False)

    def describe(self, support: Sequence) -> dict:
        th = ["inf" if t is None else str(support[t]) for t in self.thresholds]
        return dict(order=list(self.order), thresholds=th)


def _exceedance(fi: FiniteInstance, order: Sequence[int], thresholds: Sequence, profiles) -> tuple:
    dist = [Fraction(0)] * fi.k  # dist[j] = P[A = a_j]
    for combo, pr in profiles:
        got = 0
        for item, th in zip(order, thresholds):
            if th is not None and combo[item] >= th:
                got = combo[item]
                break
        dist[got] += pr
    tail = []
    acc = Fraction(0)
    for j in range(fi.k - 1, -1, -1):
        acc += dist[j]
        tail.append(acc)
    return tuple(reversed(tail))


def enumerate_algorithms(fi: FiniteInstance, cap: int = DEFAULT_CAP) -> list:
    """All n! (k+1)^n (order, threshold) algorithms with exact exceedance vectors."""
    count = math.factorial(fi.n) * (fi.k + 1) ** fi.n
    if count > cap:
        raise CapExceeded(f"{count} algorithms exceed the cap of {cap}")
    profiles = list(fi.profiles())
    levels = list(range(fi.k)) + [None]
    out = []
    for order in itertools.permutations(range(fi.n)):
        for th in itertools.product(levels, repeat=fi.n):
            out.append(DeterministicAlgorithm(order, th, _exceedance(fi, order, th, profiles)))
    return out


def deduplicate(algorithms: Sequence[DeterministicAlgorithm]) -> list:
    seen: dict = {}
    for a in algorithms:
        seen.setdefault(a.exceedance, a)
    return list(seen.values())


@dataclass(frozen=True)
class LpSolution:
    alpha: Fraction  # LP2 optimum
    mu: Fraction  # LP1 optimum
    lam: tuple  # LP2 weights over ``columns``
    c: tuple  # LP1 weights over support levels
    columns: tuple  # exceedance vectors (one per column of LP2)
    labels: tuple  # algorithm (or per-order choice) behind each column
    max_exceedance: tuple
    groups: Optional[tuple] = None  # prophet-secretary: column index ranges per arrival order

    @property
    def duality_gap(self) -> float:
        return float(abs(self.mu - self.alpha))


def _lp_pair(columns: Sequence[tuple], px: Sequence[Fraction], groups=None, weight=None):
    """Solve LP2 (max alpha) and LP1 (min mu) for the given exceedance columns.

    ``groups`` (list of column-index lists) switches to the factored form where
    each group carries its own simplex constraint and the exceedance is the
    ``weight``-average over groups.
    """
    k = len(px)
    N = len(columns)
    if groups is None:
        groups = [list(range(N))]
        weight = Fraction(1)
    # LP2 variables: alpha, lambda_1..N
    c2 = [Fraction(1)] + [Fraction(0)] * N
    A_ub = [[px[j]] + [-weight * col[j] for col in columns] for j in range(k)]
    b_ub = [Fraction(0)] * k
    A_eq = []
    for g in groups:
        row = [Fraction(0)] * (N + 1)
        for i in g:
            row[i + 1] = Fraction(1)
        A_eq.append(row)
    lp2 = solve(c2, A_ub, b_ub, A_eq, [Fraction(1)] * len(groups), maximize=True)
    # LP1 variables: c_1..k, mu_1..G
    G = len(groups)
    c1 = [Fraction(0)] * k + [Fraction(1)] * G
    A_ub1, b_ub1 = [], []
    for gi, g in enumerate(groups):
        for i in g:
            row = [weight * columns[i][j] for j in range(k)] + [Fraction(0)] * G
            row[k + gi] = Fraction(-1)
            A_ub1.append(row)
            b_ub1.append(Fraction(0))
    lp1 = solve(c1, A_ub1, b_ub1, [list(px) + [Fraction(0)] * G], [Fraction(1)])
    return lp2, lp1


def solve_lp_pair(fi: FiniteInstance, algorithms: Optional[Sequence[DeterministicAlgorithm]] = None,
                  cap: int = DEFAULT_CAP) -> LpSolution:
    algs = deduplicate(algorithms if algorithms is not None else enumerate_algorithms(fi, cap))
    px = fi.max_exceedance()
    cols = [a.exceedance for a in algs]
    lp2, lp1 = _lp_pair(cols, px)
    sol = LpSolution(lp2.value, lp1.value, lp2.x[1:], lp1.x[:fi.k], tuple(cols), tuple(algs), px)
    if sol.duality_gap > 1e-9:
        raise VerificationFailure(f"strong duality violated: mu*={sol.mu} alpha*={sol.alpha}")
    return sol


def solve_secretary_lp_pair(fi: FiniteInstance, cap: int = SECRETARY_CAP) -> LpSolution:
    """Order-aware prophet-secretary variant: each arrival order gets its own threshold sequence.

    The order is uniform and revealed upfront, so a randomized algorithm is a
    distribution over maps from orders to threshold sequences.  Its exceedance
    vector is the average over orders of per-order mixtures, which gives a
    factored LP with one simplex constraint per order.
    """
    if fi.n > 3 or fi.k > 3:
        raise CapExceeded("the prophet-secretary variant is limited to n <= 3 and k <= 3")
    count = math.factorial(fi.n) * (fi.k + 1) ** fi.n
    if count > cap:
        raise CapExceeded(f"{count} per-order choices exceed the cap of {cap}")
    profiles = list(fi.profiles())
    levels = list(range(fi.k)) + [None]
    cols, labels, groups = [], [], []
    for order in itertools.permutations(range(fi.n)):
        seen: dict = {}
        for th in itertools.product(levels, repeat=fi.n):
            ex = _exceedance(fi, order, th, profiles)
            seen.setdefault(ex, DeterministicAlgorithm(order, th, ex))
        start = len(cols)
        for ex, a in seen.items():
            cols.append(ex)
            labels.append(a)
        groups.append(list(range(start, len(cols))))
    px = fi.max_exceedance()
    weight = Fraction(1, math.factorial(fi.n))
    lp2, lp1 = _lp_pair(cols, px, groups, weight)
    sol = LpSolution(lp2.value, lp1.value, lp2.x[1:], lp1.x[:fi.k], tuple(cols), tuple(labels), px,
                     tuple(tuple(g) for g in groups))
    if sol.duality_gap > 1e-9:
        raise VerificationFailure(f"strong duality violated: mu*={sol.mu} alpha*={sol.alpha}")
    return sol


@dataclass(frozen=True)
class AsdMixture:
    weights: tuple  # (column index, weight) for the support of lambda*
    exceedance: tuple  # P[A >= a_j] of the mixture
    residuals: tuple  # P[A >= a_j] - alpha* P[X >= a_j]
    mean: Fraction
    alpha: Fraction

    @property
    def min_residual(self) -> float:
        return float(min(self.residuals))

    @property
    def is_point_mass(self) -> bool:
        return len(self.weights) == 1


def extract_asd_mixture(sol: LpSolution, tol: float = 1e-9, support=None) -> AsdMixture:
    """The randomized algorithm given by lambda*, with its dominance residuals verified."""
    k = len(sol.max_exceedance)
    weight = Fraction(1) if sol.groups is None else Fraction(1, len(sol.groups))
    ex = tuple(weight * sum((l * col[j] for l, col in zip(sol.lam, sol.columns)), Fraction(0))
               for j in range(k))
    res = tuple(ex[j] - sol.alpha * sol.max_exceedance[j] for j in range(k))
    mass = sum(sol.lam, Fraction(0))
    expected = 1 if sol.groups is None else len(sol.groups)
    if mass != expected:
        raise VerificationFailure(f"mixture weights sum to {mass}, expected {expected}")
    if min(res) < -tol:
        raise VerificationFailure(f"ASD constraint violated by {float(min(res)):.3g}")
    mean = Fraction(0)
    if support is not None:
        mean = sum(((support[j] - support[j - 1]) * ex[j] for j in range(1, k)), Fraction(0))
    weights = tuple((i, l) for i, l in enumerate(sol.lam) if l > 0)
    return AsdMixture(weights, ex, res, mean, sol.alpha)


def best_single_ratio(sol: LpSolution) -> Fraction:
    """max over columns of min_j P[A_i >= a_j] / P[X >= a_j]."""
    best = Fraction(0)
    for col in sol.columns:
        r = min((col[j] / p for j, p in enumerate(sol.max_exceedance) if p > 0), default=Fraction(1))
        best = max(best, r)
    return best


def secretary_brute_force_alpha(fi: FiniteInstance) -> Fraction:
    """Plain LP2 over every map from arrival orders to threshold sequences (n = 2 only)."""
    if fi.n != 2:
        raise ValueError("the brute-force secretary oracle is limited to n = 2")
    profiles = list(fi.profiles())
    levels = list(range(fi.k)) + [None]
    per_order = []
    for order in itertools.permutations(range(fi.n)):
        per_order.append({_exceedance(fi, order, th, profiles)
                          for th in itertools.product(levels, repeat=fi.n)})
    half = Fraction(1, 2)
    cols = {tuple(half * (u[j] + v[j]) for j in range(fi.k)) for u in per_order[0] for v in per_order[1]}
    lp2, _ = _lp_pair(sorted(cols), fi.max_exceedance())
    return lp2.value

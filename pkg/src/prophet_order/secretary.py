"""Prophet-secretary hardness: N IID items plus one deterministic item.

Everything is evaluated in the epsilon -> 0 limit except the brute-force
oracle, which works with a finite epsilon and explicit value profiles.

With a fixed arrival order the optimal continuation values satisfy
``tau_i = tau_{i+1} + E[(v_i - tau_{i+1})^+]``.  For an IID item the limit
step is ``phi(tau) = tau + sum_{b_j > tau} (b_j - tau) p_j / N + 1 / N``; for
the deterministic item it is ``max(a, tau)``.  If s IID items follow the
deterministic one, the continuation seen by the deterministic item is
``phi^s(0)``.  When that is at least ``a`` the deterministic step is the
identity and the ordering is worth ``phi^N(0)``; otherwise it is worth
``phi^(N - s)(a)``.  Two chains of length N therefore cover all N + 1
orderings.
"""
from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ProphetOrderError

PUBLISHED_N = 100_000
PUBLISHED_A = 0.82
PUBLISHED_B = (1.2, 1.25, 1.3, 1.35, 1.4, 1.45, 1.5, 1.55, 1.6, 1.65, 1.7, 1.8)
PUBLISHED_P = (0.02, 0.03, 0.04, 0.05, 0.04, 0.03, 0.03, 0.02, 0.02, 0.02, 0.02, 0.005)
PUBLISHED_RATIO = 0.725398


@dataclass(frozen=True)
class HardnessInstance:
    N: int
    a: float
    b: tuple = ()
    p: tuple = ()
    epsilon: Optional[float] = None  # None means the epsilon -> 0 limit

    def __post_init__(self):
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        object.__setattr__(self, "p", tuple(float(x) for x in self.p))
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if len(self.b) != len(self.p):
            raise ValueError("b and p must have the same length")
        if self.a <= 0:
            raise ValueError("a must be positive")
        chain = (self.a,) + self.b
        if any(y <= x for x, y in zip(chain, chain[1:])):
            raise ValueError("need a < b_1 < ... < b_k")
        if any(x <= 0 for x in self.p):
            raise ValueError("masses p_i must be positive")
        eps = self.epsilon or 0.0
        if eps < 0 or sum(self.p) / self.N + eps > 1.0:
            raise ValueError("need sum(p) / N + epsilon <= 1")
        if self.epsilon is not None and self.b and 1.0 / (self.N * self.epsilon) <= self.b[-1]:
            raise ValueError("need b_k < 1 / (N epsilon)")

    @property
    def k(self) -> int:
        return len(self.b)

    @classmethod
    def published(cls, N: int = PUBLISHED_N) -> "HardnessInstance":
        return cls(N, PUBLISHED_A, PUBLISHED_B, PUBLISHED_P)

    def iid_support(self) -> list:
        """(value, probability) atoms of one IID item at finite epsilon."""
        eps = float(self.epsilon)
        pts = [(0.0, 1.0 - sum(self.p) / self.N - eps)]
        pts += [(bj, pj / self.N) for bj, pj in zip(self.b, self.p)]
        pts.append((1.0 / (self.N * eps), eps))
        return pts


class _Compensated:
    """Neumaier compensated running sum."""

    __slots__ = ("s", "c")

    def __init__(self, s: float = 0.0):
        self.s, self.c = s, 0.0

    def add(self, x: float) -> None:
        t = self.s + x
        if abs(self.s) >= abs(x):
            self.c += (self.s - t) + x
        else:
            self.c += (x - t) + self.s
        self.s = t

    @property
    def value(self) -> float:
        return self.s + self.c


class _Step:
    """E[(v - tau)^+] for one IID item, via suffix sums over the sorted b."""

    def __init__(self, hi: HardnessInstance):
        self.hi = hi
        self.b = list(hi.b)
        k = hi.k
        self.sp = [0.0] * (k + 1)
        self.sbp = [0.0] * (k + 1)
        for j in range(k - 1, -1, -1):
            self.sp[j] = self.sp[j + 1] + hi.p[j]
            self.sbp[j] = self.sbp[j + 1] + hi.b[j] * hi.p[j]
        self.top = hi.b[-1] if hi.b else -math.inf

    def excess(self, tau: float) -> float:
        N = self.hi.N
        if tau >= self.top:
            base = 0.0  # past b_k only the vanishing top atom contributes
        else:
            j = bisect.bisect_right(self.b, tau)
            base = (self.sbp[j] - tau * self.sp[j]) / N
        eps = self.hi.epsilon
        if eps is None:
            return base + 1.0 / N
        top = 1.0 / (N * eps)
        return base + eps * max(top - tau, 0.0)


def _chain(hi: HardnessInstance, start: float, steps: int) -> np.ndarray:
    step = _Step(hi)
    bound = (hi.b[-1] if hi.b else hi.a) + 1.0
    if hi.epsilon is not None:
        bound = 1.0 / (hi.N * hi.epsilon) + 1.0
    out = np.empty(steps + 1)
    acc = _Compensated(start)
    out[0] = start
    for s in range(1, steps + 1):
        acc.add(step.excess(acc.value))
        v = acc.value
        if not v <= bound * (1 + 1e-12):
            raise ProphetOrderError(f"recursion value {v} exceeded the sanity bound {bound}")
        out[s] = v
    return out


def suffix_recursion_cache(hi: HardnessInstance) -> np.ndarray:
    """Continuation values phi^s(0) for s = 0..N of an all-IID suffix."""
    return _chain(hi, 0.0, hi.N)


def ordering_values(hi: HardnessInstance) -> np.ndarray:
    """Optimal expected reward for each ordering, indexed by s = #IID items after the deterministic one."""
    iid = suffix_recursion_cache(hi)
    psi = _chain(hi, hi.a, hi.N)
    s = np.arange(hi.N + 1)
    return np.where(iid >= hi.a, iid[hi.N], psi[hi.N - s])


def ordering_value_direct(hi: HardnessInstance, s: int) -> float:
    """Plain backward recursion for one ordering (no shared caches)."""
    step = _Step(hi)
    tau = 0.0
    for _ in range(s):
        tau += step.excess(tau)
    tau = max(hi.a, tau)
    for _ in range(hi.N - s):
        tau += step.excess(tau)
    return tau


def _pow_n(x: float, N: int) -> float:
    """(1 - x) ** N evaluated as exp(N log1p(-x))."""
    return math.exp(N * math.log1p(-x)) if x < 1 else 0.0


def max_expectation_limit(hi: HardnessInstance) -> float:
    """E[max] in the epsilon -> 0 limit."""
    N = hi.N
    tails = [sum(hi.p[i:]) / N for i in range(hi.k + 1)]  # tails[i] = sum_{j >= i} p_j / N
    val = hi.a * _pow_n(tails[0], N)
    for i in range(hi.k):
        val += hi.b[i] * (_pow_n(tails[i + 1], N) - _pow_n(tails[i], N))
    return val + 1.0


def max_expectation(hi: HardnessInstance) -> float:
    """E[max] at finite epsilon (the limit when epsilon is None)."""
    if hi.epsilon is None:
        return max_expectation_limit(hi)
    N, eps = hi.N, hi.epsilon
    tails = [sum(hi.p[i:]) / N + eps for i in range(hi.k + 1)]
    val = hi.a * _pow_n(tails[0], N)
    for i in range(hi.k):
        val += hi.b[i] * (_pow_n(tails[i + 1], N) - _pow_n(tails[i], N))
    return val + (1.0 - _pow_n(eps, N)) / (N * eps)


@dataclass(frozen=True)
class PolicyEvaluation:
    opt: float
    max_exp: float
    ratio: float
    N: int
    per_ordering_min: float
    per_ordering_max: float


def optimal_policy_value(hi: HardnessInstance) -> PolicyEvaluation:
    vals = ordering_values(hi)
    mx = max_expectation(hi)
    opt = math.fsum(vals.tolist()) / vals.size
    if vals.max() > mx * (1 + 1e-12):
        raise ProphetOrderError("an ordering's online value exceeds E[max]")
    return PolicyEvaluation(opt, mx, opt / mx, hi.N, float(vals.min()), float(vals.max()))


def convergence_table(base: HardnessInstance, Ns: Sequence[int] = (100, 1000, 10_000, 100_000)) -> list:
    rows = []
    for N in Ns:
        ev = optimal_policy_value(HardnessInstance(N, base.a, base.b, base.p, base.epsilon))
        rows.append(dict(N=N, opt=ev.opt, max=ev.max_exp, ratio=ev.ratio))
    return rows


# ---------------------------------------------------------------------------
# Brute-force oracle (finite epsilon, tiny N)


def brute_force_value(hi: HardnessInstance) -> tuple:
    """(OPT, E[max]) by enumerating every value profile, ordering and threshold policy.

    For each ordering the optimal policy is found as the best deterministic
    threshold rule (accept the item at position r iff its value is at least
    theta_r, theta_r in the support or infinity); no recursion is used.
    """
    if hi.epsilon is None:
        raise ValueError("the brute-force oracle needs a finite epsilon")
    atoms = hi.iid_support()
    vals = np.array([v for v, _ in atoms])
    probs = np.array([q for _, q in atoms])
    N = hi.N
    n = N + 1
    # profiles over the N IID items; the deterministic item is the last column
    prof_idx = np.array(list(itertools.product(range(len(atoms)), repeat=N)), dtype=int).reshape(-1, N)
    prof_val = np.concatenate([vals[prof_idx], np.full((prof_idx.shape[0], 1), hi.a)], axis=1)
    prof_p = np.prod(probs[prof_idx], axis=1)
    e_max = float(np.dot(prof_p, prof_val.max(axis=1)))
    levels = sorted(set(vals.tolist()) | {hi.a}) + [math.inf]
    total = 0.0
    for det_pos in range(n):
        order = list(range(N))
        order.insert(det_pos, N)  # column N is the deterministic item
        seq = prof_val[:, order]
        best = -math.inf
        for thetas in itertools.product(levels, repeat=n):
            take = seq >= np.array(thetas)
            first = np.where(take.any(axis=1), take.argmax(axis=1), -1)
            reward = np.where(first >= 0, seq[np.arange(seq.shape[0]), np.maximum(first, 0)], 0.0)
            best = max(best, float(np.dot(prof_p, reward)))
        total += best
    return total / n, e_max

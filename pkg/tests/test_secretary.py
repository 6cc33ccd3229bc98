import math

import numpy as np
import pytest

from prophet_order.errors import ProphetOrderError
from prophet_order.secretary import (PUBLISHED_RATIO, HardnessInstance, brute_force_value,
                                     convergence_table, max_expectation, max_expectation_limit,
                                     optimal_policy_value, ordering_value_direct, ordering_values,
                                     suffix_recursion_cache)


def test_instance_validation():
    with pytest.raises(ValueError):
        HardnessInstance(0, 1.0)
    with pytest.raises(ValueError):
        HardnessInstance(3, 1.0, (0.5,), (0.1,))
    with pytest.raises(ValueError):
        HardnessInstance(3, 1.0, (2.0, 3.0), (0.1,))
    with pytest.raises(ValueError):
        HardnessInstance(3, 1.0, (2.0,), (0.0,))
    with pytest.raises(ValueError):
        HardnessInstance(2, 1.0, (2.0,), (0.3,), epsilon=0.9)
    with pytest.raises(ValueError):
        HardnessInstance(2, 1.0, (2.0,), (0.3,), epsilon=0.4)  # top atom 1/(N eps) below b_k


def test_k_zero_limit_max():
    for N in (1, 5, 100):
        assert max_expectation_limit(HardnessInstance(N, 0.7)) == pytest.approx(1.7, abs=1e-15)


def test_suffix_cache_basic_properties():
    hi = HardnessInstance.published(2000)
    cache = suffix_recursion_cache(hi)
    assert cache[0] == 0.0
    assert np.all(np.diff(cache) >= 0)
    assert cache[-1] < max_expectation_limit(hi)


def test_direct_recursion_matches_cached_chains():
    hi = HardnessInstance.published(300)
    vals = ordering_values(hi)
    direct = np.array([ordering_value_direct(hi, s) for s in range(hi.N + 1)])
    assert np.max(np.abs(vals - direct)) < 1e-12


def test_every_ordering_below_prophet():
    hi = HardnessInstance.published(5000)
    assert ordering_values(hi).max() <= max_expectation_limit(hi)


def test_ratio_at_ten_thousand():
    ev = optimal_policy_value(HardnessInstance.published(10_000))
    assert abs(ev.ratio - 0.7254) <= 5e-4
    assert 0 < ev.ratio <= 1
    assert ev.per_ordering_min <= ev.opt <= ev.per_ordering_max


def test_convergence_diagnostic():
    rows = convergence_table(HardnessInstance.published(10_000), (100, 1000, 10_000))
    ratios = [r["ratio"] for r in rows]
    # increments shrink roughly tenfold per decade of N
    assert abs(ratios[-1] - ratios[-2]) < 2e-4
    assert abs(ratios[-1] - ratios[-2]) < 0.2 * abs(ratios[-2] - ratios[-3])


@pytest.mark.slow
def test_convergence_final_increment_at_full_scale():
    rows = convergence_table(HardnessInstance.published(100_000))
    assert abs(rows[-1]["ratio"] - rows[-2]["ratio"]) < 1e-4
    assert rows[-1]["ratio"] == pytest.approx(PUBLISHED_RATIO, abs=1e-5)


def _small_cases():
    out = []
    for N in (1, 2, 3):
        for b, p in [((), ()), ((2.0,), (0.3,)), ((1.5, 2.5), (0.2, 0.4))]:
            for a in (0.5, 1.0):
                out.append((N, a, b, p))
    return out


@pytest.mark.parametrize("N,a,b,p", _small_cases())
def test_recursion_matches_brute_force(N, a, b, p):
    eps = 1e-3
    hi = HardnessInstance(N, a, b, p, epsilon=eps)
    opt_bf, max_bf = brute_force_value(hi)
    vals = ordering_values(hi)
    assert math.fsum(vals.tolist()) / vals.size == pytest.approx(opt_bf, abs=1e-12)
    assert max_expectation(hi) == pytest.approx(max_bf, abs=1e-12)


@pytest.mark.parametrize("N,a,b,p", _small_cases()[::3])
def test_epsilon_to_zero_extrapolation(N, a, b, p):
    lim = HardnessInstance(N, a, b, p)
    ev = optimal_policy_value(lim)
    errs = []
    for eps in (1e-3, 1e-4, 1e-5):
        hi = HardnessInstance(N, a, b, p, epsilon=eps)
        opt_bf, max_bf = brute_force_value(hi)
        err = max(abs(opt_bf - ev.opt), abs(max_bf - ev.max_exp))
        assert err <= 10 * (1 + N) * eps
        errs.append(err)
    assert errs[-1] <= errs[0]


def test_max_expectation_monte_carlo():
    """N=3, k=1, b=2, p=0.3, a=1 at epsilon=1e-6 against a direct simulation of E[max]."""
    hi = HardnessInstance(3, 1.0, (2.0,), (0.3,), epsilon=1e-6)
    rng = np.random.default_rng(123)
    atoms = hi.iid_support()
    vals = np.array([v for v, _ in atoms])
    pr = np.array([q for _, q in atoms])
    T = 4_000_000
    draws = vals[rng.choice(len(vals), size=(T, hi.N), p=pr / pr.sum())]
    m = np.maximum(draws.max(axis=1), hi.a)
    se = m.std() / math.sqrt(T)
    assert max_expectation(hi) == pytest.approx(m.mean(), abs=3 * se)
    # epsilon -> 0 limit is within O(epsilon) of the finite value
    assert max_expectation_limit(HardnessInstance(3, 1.0, (2.0,), (0.3,))) == pytest.approx(
        max_expectation(hi), abs=1e-5)


def test_brute_force_needs_epsilon():
    with pytest.raises(ValueError):
        brute_force_value(HardnessInstance(2, 1.0))


def test_brute_force_is_independent_of_recursion_on_a_hand_case():
    """N = 1, k = 0: the IID item is 1/eps w.p. eps, else 0; the deterministic item is a."""
    a, eps = 0.5, 0.01
    hi = HardnessInstance(1, a, epsilon=eps)
    opt, emax = brute_force_value(hi)
    # order (det, iid): accept a iff a > E[iid] = 1; so take iid path worth 1
    # order (iid, det): accept iid if its value >= a, else take a
    first = 1.0
    second = eps * (1 / eps) + (1 - eps) * a
    assert opt == pytest.approx((first + second) / 2, abs=1e-15)
    assert emax == pytest.approx(eps * (1 / eps) + (1 - eps) * a, abs=1e-15)


def test_sanity_bound_guards_overflow(monkeypatch):
    import prophet_order.secretary as sec
    monkeypatch.setattr(sec._Step, "excess", lambda self, tau: 10.0)
    with pytest.raises(ProphetOrderError):
        sec.suffix_recursion_cache(HardnessInstance(5, 1.0, (2.0,), (0.3,)))

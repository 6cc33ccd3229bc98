import json
import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import smooth_corpus, scheme_corpus
from prophet_order.distributions import (
    TOL_PROB,
    Floored,
    FiniteSupport,
    Instance,
    PiecewiseLinearCdf,
    Power,
    TimeGrid,
    Uniform,
    level_functions,
    load_instance,
    max_exceed_prob,
    threshold_for_others,
    threshold_tau,
)
from prophet_order.errors import NonInvertible

LAWS = [
    Uniform(0.2, 0.7),
    Power(2.0, 0.3, 0.5),
    Power(1.0, 4.0),
    PiecewiseLinearCdf(((0.0, 0.0), (0.3, 0.6), (0.3, 0.6), (1.0, 1.0))),
    FiniteSupport(((0.1, 0.25), (0.4, 0.5), (0.9, 0.25))).smoothed(0.01),
    Floored(Uniform(0.4, 0.5), 0.01, 0.0, 1.0),
]


# -- max_exceed_prob ----------------------------------------------------------


def test_max_exceed_two_uniforms(iid2):
    assert max_exceed_prob(iid2, 0.5) == pytest.approx(0.75, abs=1e-15)


def test_max_exceed_above_support(iid2):
    assert max_exceed_prob(iid2, 1.5) == 0.0
    assert max_exceed_prob(pytest.importorskip("prophet_order").pt_hard_instance(50), 2.0) == 0.0


def test_max_exceed_excluding_item(iid2):
    assert max_exceed_prob(iid2, 0.5, exclude=1) == pytest.approx(0.5, abs=1e-15)


def test_max_exceed_rejects_negative(iid2):
    with pytest.raises(ValueError):
        max_exceed_prob(iid2, -0.1)


@given(st.floats(0.0, 1.0), st.integers(2, 40))
def test_power_family_has_uniform_max(x, N):
    inst = Instance((Power(1.0, 1.0 / N),) * N)
    assert max_exceed_prob(inst, x) == pytest.approx(1.0 - x, abs=1e-12)


@given(st.floats(0.0, 1.0))
def test_max_exceed_matches_product_formula(x):
    inst = Instance((Uniform(0, 1), Uniform(0.2, 0.9), Power(1.0, 2.0)))
    f = min(x, 1.0) * min(max((x - 0.2) / 0.7, 0.0), 1.0) * x * x
    assert max_exceed_prob(inst, x) == pytest.approx(1.0 - f, abs=1e-14)


# -- threshold_tau ------------------------------------------------------------


def test_threshold_two_uniforms_closed_form(iid2):
    assert threshold_tau(iid2, 0.75) == pytest.approx(0.5, abs=1e-10)


def test_threshold_endpoints(iid2):
    assert threshold_tau(iid2, 0.0) == 1.0
    assert threshold_tau(iid2, 1.0) == 0.0


@given(st.floats(1e-9, 1.0 - 1e-9))
@settings(max_examples=60)
def test_threshold_inverts_closed_form(t):
    inst = Instance((Uniform(0, 1), Uniform(0, 1)))
    assert threshold_tau(inst, t) == pytest.approx(math.sqrt(1.0 - t), abs=1e-10)


def test_threshold_rejects_out_of_range(iid2):
    with pytest.raises(ValueError):
        threshold_tau(iid2, 1.5)


def test_threshold_flat_region_raises():
    coin = FiniteSupport(((0.0, 0.5), (1.0, 0.5)))
    inst = Instance((coin, coin))
    # max-CDF equals 0.25 everywhere between the two smoothed atoms
    with pytest.raises(NonInvertible):
        threshold_tau(inst, 0.75)
    assert threshold_tau(inst, 0.5) == pytest.approx(1.0, abs=1e-5)


def test_threshold_for_others_matches_single_item(iid2):
    lv = np.array([0.1, 0.5, 0.9])
    out = threshold_for_others(iid2, 0, lv)
    assert out == pytest.approx(1.0 - lv, abs=1e-10)


# -- level functions -----------------------------------------------------------


def test_levels_at_three_quarters(iid2):
    grid = TimeGrid.from_nodes([0.0, 0.25, 0.75, 1.0])
    lv = level_functions(iid2, grid)
    assert lv.p[0, 2] == pytest.approx(0.5, abs=1e-10)
    assert lv.q[0, 2] == pytest.approx(0.5, abs=1e-10)
    assert lv.pc[0, 2] * lv.qc[0, 2] == pytest.approx(0.25, abs=1e-12)


def test_levels_endpoints(iid2_levels):
    lv = iid2_levels
    assert np.all(lv.p[:, 0] == 0) and np.all(lv.q[:, 0] == 0)
    assert lv.p[:, -1] == pytest.approx(1.0, abs=TOL_PROB)
    assert lv.q[:, -1] == pytest.approx(1.0, abs=TOL_PROB)


@pytest.mark.parametrize("name,inst", scheme_corpus(), ids=lambda v: v if isinstance(v, str) else "")
def test_levels_identity_and_bounds(name, inst, grid):
    lv = level_functions(inst, grid)
    assert lv.identity_residual() <= TOL_PROB
    t = grid.t[None, :]
    assert np.all(lv.p <= t + TOL_PROB) and np.all(lv.q <= t + TOL_PROB)
    assert np.all(lv.p >= 0) and np.all(lv.q >= 0)
    assert np.all(np.diff(lv.p, axis=1) >= -TOL_PROB)
    assert np.all(np.diff(lv.q, axis=1) >= -TOL_PROB)
    assert np.all(np.diff(lv.tau) <= 1e-10)


def test_level_tables_are_thread_safe(iid2, grid):
    with ThreadPoolExecutor(4) as pool:
        outs = list(pool.map(lambda _: level_functions(iid2, grid).p, range(8)))
    for o in outs[1:]:
        assert np.array_equal(o, outs[0])


# -- laws ----------------------------------------------------------------------


@pytest.mark.parametrize("law", LAWS, ids=lambda l: type(l).__name__)
def test_cdf_sf_logcdf_consistent(law):
    lo, hi = law.support
    x = np.linspace(lo - 0.1, hi + 0.1, 301)
    assert law.cdf(x) + law.sf(x) == pytest.approx(np.ones_like(x), abs=1e-14)
    with np.errstate(divide="ignore"):
        ref = np.log(law.cdf(x))
    mask = law.cdf(x) > 1e-300
    assert law.logcdf(x)[mask] == pytest.approx(ref[mask], abs=1e-12)


@pytest.mark.parametrize("law", LAWS, ids=lambda l: type(l).__name__)
def test_sampler_matches_cdf(law):
    rng = np.random.default_rng(7)
    xs = np.sort(law.sample(rng, 20000))
    emp = np.arange(1, xs.size + 1) / xs.size
    # Kolmogorov-Smirnov distance well inside the 99.9% band (~0.0138)
    assert np.max(np.abs(emp - law.cdf(xs))) < 0.0138


@pytest.mark.parametrize("law", LAWS, ids=lambda l: type(l).__name__)
def test_mean_matches_sampling(law):
    rng = np.random.default_rng(3)
    xs = law.sample(rng, 200000)
    assert law.mean() == pytest.approx(xs.mean(), abs=5 * xs.std() / math.sqrt(xs.size))


def test_smoothing_converges_to_step():
    fs = FiniteSupport(((0.2, 0.3), (0.6, 0.7)))
    other = Uniform(0.0, 1.0)
    for x in (0.1, 0.4, 0.8):
        exact = 1.0 - fs.cdf(x) * x
        errs = [abs(max_exceed_prob(Instance((fs, other), smoothing_width=w), x) - exact)
                for w in (0.1, 1e-2, 1e-4)]
        assert errs[-1] < 1e-12
    # inside a kernel the error shrinks with the width
    x = 0.2 + 0.01
    errs = [abs(max_exceed_prob(Instance((fs, other), smoothing_width=w), x) - (1 - fs.cdf(x) * x))
            for w in (0.1, 0.05, 1e-3)]
    assert errs[0] > errs[1] > errs[2] == pytest.approx(0.0, abs=1e-12)


def test_smoothing_shifts_kernels_off_zero():
    pl = FiniteSupport(((0.0, 0.5), (1.0, 0.5))).smoothed(0.2)
    assert pl.support[0] == 0.0
    assert pl.cdf(0.2) == pytest.approx(0.5)


@pytest.mark.parametrize("bad", [
    lambda: Uniform(1.0, 1.0),
    lambda: Uniform(-1.0, 1.0),
    lambda: FiniteSupport(((0.0, 0.5), (1.0, 0.4))),
    lambda: PiecewiseLinearCdf(((0.0, 0.0), (1.0, 0.9))),
    lambda: PiecewiseLinearCdf(((0.0, 0.5), (1.0, 0.4), (2.0, 1.0))),
    lambda: Power(1.0, -1.0),
    lambda: Instance((Uniform(0, 1),)),
])
def test_invalid_inputs(bad):
    with pytest.raises(ValueError):
        bad()


def test_grouping_identical_items(pt_hard):
    assert len(pt_hard.groups) == 2
    assert pt_hard.multiplicity.tolist() == [1.0, 1000.0]


def test_json_roundtrip(tmp_path):
    inst = Instance((Uniform(0, 1), Power(2.0, 0.5, 0.5), FiniteSupport(((0.0, 0.5), (1.0, 0.5))),
                     PiecewiseLinearCdf(((0, 0), (1, 1)))), smoothing_width=0.01, floor_weight=1e-6)
    path = tmp_path / "inst.json"
    path.write_text(json.dumps(inst.to_dict()))
    back = load_instance(path)
    assert back.items == inst.items
    assert back.smoothing_width == 0.01 and back.floor_weight == 1e-6


def test_json_copies(tmp_path):
    path = tmp_path / "inst.json"
    path.write_text(json.dumps({"items": [{"kind": "uniform", "params": {"lo": 0, "hi": 1}, "copies": 3}]}))
    assert load_instance(path).n == 3


# -- time grid -----------------------------------------------------------------


def test_default_grid_shape(grid):
    assert grid.t[0] == 0.0 and grid.t[-1] == 1.0
    assert grid.s[0] == 1.0 and grid.s[-1] == 0.0
    assert np.all(np.diff(grid.t) >= 0) and np.all(np.diff(grid.s) < 0)
    assert grid.m > 4096
    assert grid.t[1] <= 1e-12 and grid.s[-2] <= 1e-30
    assert np.all(grid.dt > 0)


def test_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid.from_nodes([0.1, 1.0])
    with pytest.raises(ValueError):
        TimeGrid.from_nodes([0.0, 0.5, 0.5, 1.0])

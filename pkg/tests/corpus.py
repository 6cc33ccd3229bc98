"""Deterministic instance corpora shared by the scheme, simulator, LP and acceptance tests."""
from fractions import Fraction as F

import numpy as np

from prophet_order.distributions import (FiniteSupport, Instance, PiecewiseLinearCdf, Power,
                                         Uniform, pt_hard_instance)
from prophet_order.lp_asd import FiniteInstance


def smooth_corpus():
    """Instances with contiguous supports and no floor."""
    return [
        ("iid_uniform_2", Instance((Uniform(0, 1),) * 2)),
        ("iid_uniform_5", Instance((Uniform(0, 1),) * 5)),
        ("two_uniforms", Instance((Uniform(0, 1), Uniform(0.2, 0.9)))),
        ("nested_uniforms", Instance((Uniform(0, 2), Uniform(0.5, 1.5), Uniform(0.9, 1.1)))),
        ("powers", Instance((Power(1.0, 2.0), Power(1.0, 0.5), Uniform(0, 1)))),
        ("pwl", Instance((PiecewiseLinearCdf(((0, 0), (0.5, 0.8), (1, 1))), Uniform(0.1, 0.9)))),
    ]


def scheme_corpus():
    """At least 20 instances, including adverse ones and the hard instance at N = 1000."""
    out = list(smooth_corpus())
    out.append(("pt_hard_1000", pt_hard_instance(1000)))
    for N, alpha in [(50, 0.2109), (200, 0.2109), (500, 0.2), (500, 0.23), (1000, 0.25), (300, 0.18)]:
        out.append((f"pt_hard_{N}_{alpha}", pt_hard_instance(N, alpha)))
    out.append(("narrow_plus_iid", Instance((Uniform(0.3, 0.31),) + (Power(1.0, 0.05),) * 20,
                                            floor_weight=1e-9)))
    out.append(("point_like_pair", Instance((Uniform(0.99, 1.0), Uniform(0.49, 0.5)), floor_weight=1e-6)))
    rng = np.random.default_rng(20240611)
    for r in range(8):
        n = int(rng.integers(2, 5))
        items = []
        for _ in range(n):
            kind = rng.integers(0, 3)
            lo = float(np.round(rng.uniform(0, 0.6), 3))
            hi = float(np.round(lo + rng.uniform(0.05, 0.4), 3))
            if kind == 0:
                items.append(Uniform(lo, hi))
            elif kind == 1:
                items.append(Power(hi, float(np.round(rng.uniform(0.2, 3.0), 2)), lo))
            else:
                vals = np.round(np.sort(rng.choice(np.arange(1, 20), 3, replace=False)) / 20, 3)
                w = rng.dirichlet(np.ones(3))
                w = np.round(w / w.sum(), 6)
                w[-1] = 1 - w[:-1].sum()
                items.append(FiniteSupport(tuple(zip(vals.tolist(), w.tolist()))))
        out.append((f"random_{r}", Instance(tuple(items), floor_weight=1e-6)))
    return out


COIN = [(0, F(1, 2)), (1, F(1, 2))]


def toy_corpus():
    """Thirteen finite instances with n <= 3 items and at most 3 support points (0 included)."""
    return [
        ("coins2", FiniteInstance.from_atoms([COIN, COIN])),
        ("coins3", FiniteInstance.from_atoms([COIN, COIN, COIN])),
        ("det_1_0", FiniteInstance.from_atoms([[(1, 1)], [(0, 1)]])),
        ("det_pair", FiniteInstance.from_atoms([[(1, 1)], [(2, 1)]])),
        ("risky_vs_safe", FiniteInstance.from_atoms([[(1, 1)], [(0, F(3, 4)), (4, F(1, 4))]])),
        ("two_level", FiniteInstance.from_atoms([[(1, F(2, 3)), (2, F(1, 3))], [(0, F(1, 2)), (2, F(1, 2))]])),
        ("rare_big", FiniteInstance.from_atoms([[(1, 1)], [(0, F(9, 10)), (10, F(1, 10))],
                                                 [(0, F(1, 2)), (1, F(1, 2))]])),
        ("mixed3", FiniteInstance.from_atoms([[(0, F(1, 3)), (1, F(1, 3)), (3, F(1, 3))],
                                               [(1, F(1, 2)), (3, F(1, 2))], [(0, F(4, 5)), (3, F(1, 5))]])),
        ("skew", FiniteInstance.from_atoms([[(0, F(1, 10)), (1, F(9, 10))], [(0, F(9, 10)), (5, F(1, 10))]])),
        ("three_safe", FiniteInstance.from_atoms([[(1, 1)], [(1, F(1, 2)), (2, F(1, 2))], [(0, F(1, 2)), (2, F(1, 2))]])),
        ("needs_mix", FiniteInstance.from_atoms([[(0, F(2, 5)), (1, F(1, 5)), (3, F(2, 5))],
                                                  [(0, F(1, 8)), (1, F(1, 2)), (3, F(3, 8))],
                                                  [(0, F(4, 9)), (1, F(4, 9)), (3, F(1, 9))]])),
        ("needs_mix2", FiniteInstance.from_atoms([[(0, F(1, 6)), (1, F(1, 3)), (3, F(1, 2))],
                                                   [(0, F(1, 2)), (1, F(1, 4)), (3, F(1, 4))],
                                                   [(0, F(2, 7)), (1, F(2, 7)), (3, F(3, 7))]])),
        ("hard_pair", FiniteInstance.from_atoms([[(0, F(1, 4)), (1, F(3, 8)), (3, F(3, 8))],
                                                  [(0, F(1, 5)), (1, F(1, 5)), (3, F(3, 5))]])),
    ]

"""Auxiliary functions H, K, M, mu, Y, W and the constants built on them.

Everything here is a scalar function of (z, Gamma) evaluated with adaptive
quadrature and bracketed root finding; roots are always certified by a sign
change of the defining difference before they are reported.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import BracketFailure

GAMMA_STAR = 0.7258
GAMMA_PRIME = 0.7276
Z_CAP = 1.0 - 1e-9
ROOT_TOL = 1e-12
ONE_MINUS_INV_E = 1.0 - 1.0 / math.e


def _check_z(z: float) -> None:
    if not 0.0 <= z < 1.0:
        raise ValueError(f"z must lie in [0, 1), got {z}")


def _check_gamma(gamma: float) -> None:
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")


def ell(z: float) -> float:
    """-(1 - z) ln(1 - z), continuous at z = 1 with value 0."""
    if z >= 1.0:
        return 0.0
    return -(1.0 - z) * math.log1p(-z)


def den(z: float, gamma: float) -> float:
    """Gamma * (ell(z) - z) + 1, the common denominator of H, M and mu."""
    return gamma * (ell(z) - z) + 1.0


def aux_H(z: float, gamma: float) -> float:
    _check_z(z)
    _check_gamma(gamma)
    return gamma * ell(z) / den(z, gamma)


def aux_K(z: float, gamma: float) -> float:
    _check_z(z)
    _check_gamma(gamma)
    return gamma * (1.0 - z) / (1.0 - gamma * z)


@lru_cache(maxsize=65536)
def _M_cached(z: float, gamma: float) -> float:
    val, _ = quad(lambda x: gamma / den(x, gamma), 0.0, z, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 1.0 - val


def aux_M(z: float, gamma: float) -> float:
    _check_z(z)
    _check_gamma(gamma)
    return _M_cached(float(z), float(gamma))


# ---------------------------------------------------------------------------
# Roots


@dataclass(frozen=True)
class Root:
    value: float
    bracket: tuple  # (lo, hi) with a certified sign change

    def __float__(self) -> float:
        return self.value


def _certified_root(fn: Callable[[float], float], lo: float, hi: float, what: str,
                    tol: float = ROOT_TOL) -> Root:
    flo, fhi = fn(lo), fn(hi)
    if not (np.sign(flo) * np.sign(fhi) < 0):
        raise BracketFailure(f"{what}: no sign change on [{lo}, {hi}] ({flo:.3g}, {fhi:.3g})")
    r = brentq(fn, lo, hi, xtol=tol / 4, rtol=4 * np.finfo(float).eps, maxiter=500)
    a, b = max(lo, r - tol), min(hi, r + tol)
    if np.sign(fn(a)) * np.sign(fn(b)) > 0:
        # brentq converged onto an endpoint of the tolerance window; widen once
        a, b = max(lo, r - 10 * tol), min(hi, r + 10 * tol)
        if np.sign(fn(a)) * np.sign(fn(b)) > 0:
            raise BracketFailure(f"{what}: could not certify the refined bracket")
    return Root(r, (a, b))


def find_gamma_point(gamma: float) -> Root:
    """gamma_Gamma: the unique root of H = K on (1 - 1/e, 1)."""
    _check_gamma(gamma)
    return _certified_root(lambda z: aux_H(z, gamma) - aux_K(z, gamma),
                           ONE_MINUS_INV_E + 1e-12, 1.0 - 1e-12, "gamma point")


def find_beta(gamma: float, scan: int = 64) -> Root:
    """beta_Gamma = inf{z : M(z) <= H(z)}, the first crossing of M - H."""
    _check_gamma(gamma)
    upper = find_gamma_point(gamma).value
    fn = lambda z: aux_M(z, gamma) - aux_H(z, gamma)
    zs = np.linspace(0.0, upper, scan + 1)
    vals = [fn(z) for z in zs]
    for k in range(scan):
        if vals[k] > 0 and vals[k + 1] <= 0:
            if vals[k + 1] == 0:
                return Root(float(zs[k + 1]), (float(zs[k + 1]), float(zs[k + 1])))
            return _certified_root(fn, float(zs[k]), float(zs[k + 1]), "beta")
    raise BracketFailure(f"beta: M - H does not change sign on [0, gamma_point] at Gamma={gamma}")


@dataclass(frozen=True)
class GammaConstants:
    gamma: float
    beta: float
    gamma_point: float
    beta_bracket: tuple
    gamma_point_bracket: tuple


@lru_cache(maxsize=64)
def gamma_constants(gamma: float) -> GammaConstants:
    g = find_gamma_point(gamma)
    b = find_beta(gamma)
    return GammaConstants(gamma, b.value, g.value, b.bracket, g.bracket)


def gamma_from_gamma_point(z: float) -> float:
    """Closed form Gamma = (ln(1 - z) + 1) / (ln(1 - z) + z) inverting the H = K root."""
    lz = math.log1p(-z)
    return (lz + 1.0) / (lz + z)


# ---------------------------------------------------------------------------
# Peng-Tang and Hill-Kertz constants


def pt_alpha_residual(alpha: float) -> float:
    """int_alpha^1 (ln a + 1) / ((ln a + 1)(x - x ln x) - a) dx + 1 / ln a.

    The root of this function is alpha; it is equivalent to requiring
    beta_Gamma = gamma_Gamma at Gamma = (ln a + 1) / (ln a + 1 - a).
    """
    la = math.log(alpha) + 1.0
    val, _ = quad(lambda x: la / (la * (x - x * math.log(x)) - alpha), alpha, 1.0,
                  epsabs=1e-12, epsrel=1e-11, limit=200)
    return val + 1.0 / math.log(alpha)


@dataclass(frozen=True)
class PTConstants:
    alpha: float
    gamma_pt: float
    alpha_bracket: tuple


def compute_pt_constants(lo: float = 0.15, hi: float = 0.3) -> PTConstants:
    root = _certified_root(pt_alpha_residual, lo, hi, "alpha", tol=1e-10)
    a = root.value
    la = math.log(a) + 1.0
    return PTConstants(a, la / (la - a), root.bracket)


def hill_kertz_residual(gamma: float) -> float:
    val, _ = quad(lambda y: 1.0 / (y * (1.0 - math.log(y)) + 1.0 / gamma - 1.0) if y > 0 else gamma / (1 - gamma),
                  0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200)
    return val - 1.0


def hill_kertz_constant() -> float:
    """The IID constant ~0.745 solving int_0^1 dy / (y(1 - ln y) + 1/Gamma - 1) = 1."""
    return _certified_root(hill_kertz_residual, 0.6, 0.9, "Hill-Kertz", tol=1e-12).value


# ---------------------------------------------------------------------------
# mu, Y, W


def mu_fn(x: float, gamma: float, consts: Optional[GammaConstants] = None) -> float:
    consts = consts or gamma_constants(gamma)
    if not 0.0 <= x < consts.beta:
        raise ValueError(f"mu is defined on [0, beta={consts.beta:.6f}), got {x}")
    gp = consts.gamma_point
    scale = aux_H(gp, gamma) - aux_M(gp, gamma)
    return scale * den(x, gamma) / (gamma * (aux_M(x, gamma) - aux_H(x, gamma)))


def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")


def Y_fn(z: float, p: float, gamma: float) -> float:
    """Y_Gamma(z, p); mathematically defined on z in [gamma_Gamma, 1)."""
    _check_z(z)
    _check_p(p)
    _check_gamma(gamma)
    k = aux_K(z, gamma)
    a = gamma * (1.0 - k) / (1.0 - gamma * z)
    b = gamma * (1.0 - p * k) / (gamma * (ell(z) * (1.0 - p) - z) + 1.0)
    return (a - b) * (1.0 - gamma * z)


def W_fn(z: float, p: float, gamma: float) -> float:
    """W_Gamma(z, p); mathematically defined on z in [0, beta_Gamma]."""
    _check_z(z)
    _check_p(p)
    _check_gamma(gamma)
    a = gamma / den(z, gamma)
    b = gamma * (1.0 - p * aux_M(z, gamma)) / (gamma * (ell(z) * (1.0 - p) - z) + 1.0)
    return a - b


def integrate(fn: Callable[[float], float], a: float, b: float) -> float:
    val, _ = quad(fn, a, min(b, Z_CAP), epsabs=1e-13, epsrel=1e-11, limit=200)
    return val


# ---------------------------------------------------------------------------
# Two-adverse-item checks


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    bound: float
    relation: str  # "<", ">", "in"
    passed: bool
    reference: Optional[float] = None
    detail: str = ""

    def to_dict(self) -> dict:
        d = dict(name=self.name, value=self.value, bound=self.bound, relation=self.relation,
                 passed=bool(self.passed), detail=self.detail)
        if self.reference is not None:
            d["reference"] = self.reference
        return d


def _lt(name, value, bound, **kw) -> Check:
    return Check(name, float(value), float(bound), "<", value < bound, **kw)


def _gt(name, value, bound, **kw) -> Check:
    return Check(name, float(value), float(bound), ">", value > bound, **kw)


def _in(name, value, lo, hi) -> Check:
    return Check(name, float(value), float(lo), "in", lo <= value <= hi, detail=f"[{lo}, {hi}]")


def lemma8_integrals(gamma_pair: Sequence[float] = (GAMMA_STAR, GAMMA_PRIME)) -> list:
    """Re-derive every numeric fact used to rule out two simultaneously weakly-adverse items.

    The returned checks cover the root brackets, the four threshold constants,
    the four displayed integrals, and the arithmetic chain that turns them into
    a contradiction.
    """
    gs, gp = gamma_pair
    cs, cp = gamma_constants(gs), gamma_constants(gp)
    out = [
        _in("beta(G*)", cs.beta, 0.7879, 0.7880),
        _in("beta(G')", cp.beta, 0.7850, 0.7851),
        _in("gamma_point(G*)", cs.gamma_point, 0.7893, 0.7894),
        _in("gamma_point(G')", cp.gamma_point, 0.7900, 0.7901),
    ]
    hm_s = aux_H(cs.gamma_point, gs) - aux_M(cs.gamma_point, gs)
    hm_p = aux_H(cp.gamma_point, gp) - aux_M(cp.gamma_point, gp)
    yb_s = gs * (1 - cs.beta) - aux_H(cs.beta, gs) * (1 - gs * cs.beta)
    yb_p = gp * (1 - cp.beta) - aux_H(cp.beta, gp) * (1 - gp * cp.beta)
    out += [
        _lt("H-M at gamma_point(G*)", hm_s, 0.00163),
        _lt("H-M at gamma_point(G')", hm_p, 0.00555),
        _lt("G(1-beta)-H(beta)(1-G beta) at G*", yb_s, 0.00068),
        _lt("G(1-beta)-H(beta)(1-G beta) at G'", yb_p, 0.00237),
    ]
    y1 = integrate(lambda z: Y_fn(z, 0.9, gs), 0.7894, 0.9)
    y2 = integrate(lambda z: Y_fn(z, 0.811, gp), 0.7901, 0.947)
    w1 = integrate(lambda z: W_fn(z, 0.2, gs), 0.67, 0.7879)
    w2 = integrate(lambda z: W_fn(z, 0.3763, gp), 0.58, 0.7850)
    out += [
        _gt("int_{0.7894}^{0.9} Y_G*(z, 0.9)", y1, 0.00068, reference=0.000693),
        _gt("int_{0.7901}^{0.947} Y_G'(z, 0.811)", y2, 0.00237, reference=0.002384),
        _gt("int_{0.67}^{0.7879} W_G*(z, 0.2)", w1, 0.00163, reference=0.00165),
        _gt("int_{0.58}^{0.7850} W_G'(z, 0.3763)", w2, 0.00555, reference=0.0096),
    ]
    # The chain: p~(x) > y  <=>  p(1 - (1 - x)(1 - y)) > y.
    t_i = 1 - (1 - 0.9) * (1 - 0.9)
    t_j = 1 - (1 - 0.947) * (1 - 0.811)
    t_w = 1 - (1 - 0.67) * (1 - 0.2)
    # (1 - p_i(.99))(1 - p_j(.99)) / 0.01 >= (1 - p_i(.736))(1 - p_j(.736)) / 0.264
    # Exact rationals: the bound lands exactly on 0.3763, and strictness is
    # inherited from the strict inequalities p_i(0.99) > 0.9 and p_i(0.736) < 0.2.
    lhs_max = Fraction("0.1") * Fraction("0.189") / Fraction("0.01")
    pj_bound = 1 - lhs_max * Fraction("0.264") / Fraction("0.8")
    x_back = 1 - (1 - t_w) / (1 - 0.3763)
    g_prime = gs / (1 - gs * mu_fn(0.28, gs, cs))
    out += [
        Check("t for p_i > 0.9", t_i, 0.99, "=", abs(t_i - 0.99) < 1e-12),
        Check("t for p_j > 0.811", t_j, 0.989983, "=", abs(t_j - 0.989983) < 1e-12),
        _lt("p_j(0.99) > 0.811 by monotonicity (0.989983 < 0.99)", t_j, t_i),
        Check("t for p_i < 0.2", t_w, 0.736, "=", abs(t_w - 0.736) < 1e-12),
        Check("lower bound on p_j(0.736) (strict from strict inputs)", float(pj_bound), 0.3763, ">=",
              pj_bound >= Fraction("0.3763")),
        _lt("x-argument for p~_j > 0.3763, rounded up to 0.58", x_back, 0.58),
        _lt("Gamma' = G*/(1 - G* mu(c))", g_prime, gp, reference=0.72759),
    ]
    return out


# ---------------------------------------------------------------------------
# Wrap-up bound


def wrapup_bound(gamma: float = GAMMA_STAR, c: float = 0.28) -> float:
    """K(gamma_point) + M(c) - M(gamma_point) + int_0^c Gamma / (1 - Gamma mu(x)) dx."""
    consts = gamma_constants(gamma)
    if not 0.0 <= c < min(consts.beta, ONE_MINUS_INV_E):
        raise ValueError(f"need 0 <= c < min(beta, 1 - 1/e); got c={c}")
    gp = consts.gamma_point

    def integrand(x):
        d = 1.0 - gamma * mu_fn(x, gamma, consts)
        if d <= 0:
            raise ValueError(f"1 - Gamma mu(x) <= 0 at x={x}")
        return gamma / d

    tail = integrate(integrand, 0.0, c) if c > 0 else 0.0
    return aux_K(gp, gamma) + aux_M(c, gamma) - aux_M(gp, gamma) + tail


# ---------------------------------------------------------------------------
# Properties A, B, C on a concrete item


DEFAULT_PROBES = (0.9, 0.947, 0.67, 0.58)


@dataclass(frozen=True)
class PropertyResult:
    prop: str
    x: float
    lhs: float
    rhs: float
    applicable: bool
    satisfied: Optional[bool]

    def to_dict(self) -> dict:
        return dict(property=self.prop, x=self.x, lhs=self.lhs, rhs=self.rhs,
                    applicable=self.applicable, satisfied=self.satisfied)


@dataclass(frozen=True)
class PropertyReport:
    item: int
    gamma: float
    G_hat: float
    implied: bool  # True when the item is weakly adverse, so the properties must hold
    results: list = field(default_factory=list)


def _p_tilde_interp(x_tab: np.ndarray, p_tab: np.ndarray) -> Callable[[float], float]:
    # q is non-decreasing; where it is flat p~ is multi-valued, take the upper envelope
    def f(x: float) -> float:
        k = int(np.searchsorted(x_tab, x, side="right"))
        if k <= 0:
            return float(p_tab[0])
        if k >= x_tab.size:
            return float(p_tab[-1])
        x0, x1 = x_tab[k - 1], x_tab[k]
        w = 0.0 if x1 == x0 else (x - x0) / (x1 - x0)
        return float(p_tab[k - 1] + w * (p_tab[k] - p_tab[k - 1]))
    return f


def property_checks(inst, item: int, gamma: float = GAMMA_STAR,
                    probe_points: Optional[Sequence[float]] = None, grid=None,
                    levels=None) -> PropertyReport:
    """Evaluate Properties A, B and C for one item at a set of probe points."""
    from .distributions import level_functions
    from .scheme import weakly_adverse_check

    levels = levels or level_functions(inst, grid)
    g = levels.group_of[item]
    x_tab, xc_tab, p_tab = levels.q[g], levels.qc[g], levels.p[g]
    pt = _p_tilde_interp(x_tab, p_tab)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (p_tab[:-1] + p_tab[1:]) * (xc_tab[:-1] - xc_tab[1:]))])

    def int_pt(x: float) -> float:
        return float(np.interp(x, x_tab, cum))

    consts = gamma_constants(gamma)
    beta, gpt = consts.beta, consts.gamma_point
    rhs_B = gamma * (1 - beta) - aux_H(beta, gamma) * (1 - gamma * beta)
    rhs_C = aux_H(gpt, gamma) - aux_M(gpt, gamma)
    G_hat = weakly_adverse_check(inst, item, gamma, levels=levels).G_hat
    implied = G_hat > 1.0
    if probe_points is None:
        probe_points = tuple(DEFAULT_PROBES) + tuple(np.linspace(0.05, 0.95, 19))
    results = []
    for x in probe_points:
        x = float(x)
        if x < min(beta, ONE_MINUS_INV_E):
            lhs, rhs = int_pt(x), mu_fn(x, gamma, consts)
            results.append(PropertyResult("A", x, lhs, rhs, implied, lhs <= rhs if implied else None))
        if gpt < x <= 1.0:
            p0 = pt(x)
            lhs = integrate(lambda z: Y_fn(z, p0, gamma), gpt, x)
            results.append(PropertyResult("B", x, lhs, rhs_B, implied, lhs < rhs_B if implied else None))
        if 0.0 <= x < beta:
            p0 = pt(x)
            lhs = integrate(lambda z: W_fn(z, p0, gamma), x, beta)
            results.append(PropertyResult("C", x, lhs, rhs_C, implied, lhs < rhs_C if implied else None))
    return PropertyReport(item, gamma, G_hat, implied, results)

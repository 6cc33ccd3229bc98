"""Command-line front end.

Exit codes: 0 success, 1 a verification or numerical failure, 2 a usage error.
Every JSON document carries ``schema_version`` and a ``provenance`` block that
echoes the full configuration.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import ProphetOrderError, VerificationFailure

SCHEMA_VERSION = "1.0"


class UsageError(Exception):
    pass


def build_id() -> str:
    """Hash of the package sources, standing in for a commit id."""
    h = hashlib.sha256()
    for path in sorted(Path(__file__).parent.glob("*.py")):
        h.update(path.name.encode())
        h.update(path.read_bytes())
    return h.hexdigest()[:12]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return float(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _emit(args, payload: dict) -> None:
    config = {k: v for k, v in vars(args).items() if k != "func"}
    doc = {
        "schema_version": SCHEMA_VERSION,
        "provenance": {"package": "prophet_order", "version": __version__, "build_id": build_id(),
                       "config": config},
        **payload,
    }
    text = json.dumps(_jsonable(doc), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)


def _gamma(value: str) -> float:
    g = float(value)
    if not 0.0 < g < 1.0:
        raise UsageError(f"gamma must lie in (0, 1), got {value}")
    return g


def _load_instance(path: str):
    from .distributions import load_instance
    p = Path(path)
    if not p.exists():
        raise UsageError(f"instance file not found: {path}")
    return load_instance(p)


def _grid(args):
    from .distributions import TimeGrid
    return TimeGrid.uniform(args.grid_nodes)


# ---------------------------------------------------------------------------
# subcommands


def cmd_scheme_build(args) -> int:
    from .scheme import SchemeParams, build_two_scheme
    inst = _load_instance(args.instance)
    params = SchemeParams(gamma=_gamma(args.gamma), c=args.c, epsilon=args.epsilon, grid=_grid(args))
    built = build_two_scheme(inst, params)
    laws = built.laws
    _emit(args, {
        "scheme_id": built.scheme_id,
        "adverse_item": built.adverse_item,
        "surjective": built.surjective,
        "integrals": built.integrals,
        "scheme_one_integrals": built.scheme_one_integrals,
        "atoms": [l.atom_at_one for l in laws],
        "grid": {"nodes": params.grid.m},
    })
    return 0


def cmd_scheme_check(args) -> int:
    from .distributions import level_functions
    from .scheme import adverse_items, arrival_density_pt, weakly_adverse_check
    inst = _load_instance(args.instance)
    gamma = _gamma(args.gamma)
    levels = level_functions(inst, _grid(args))
    res = arrival_density_pt(inst, levels=levels, gamma=gamma)
    bad = adverse_items(res)
    weak = [weakly_adverse_check(inst, i, gamma, levels=levels) for i in range(inst.n)]
    _emit(args, {
        "integrals": res.integrals,
        "adverse_items": bad,
        "G_hat": [w.G_hat for w in weak],
        "weakly_adverse_items": [w.item for w in weak if w.is_weakly_adverse],
        "unique_adverse": len(bad) <= 1,
    })
    return 0


def cmd_simulate(args) -> int:
    from .scheme import SchemeParams, build_two_scheme
    from .simulator import SimulationConfig, default_workers, estimate_asd
    inst = _load_instance(args.instance)
    params = SchemeParams(gamma=_gamma(args.gamma), grid=_grid(args))
    built = build_two_scheme(inst, params)
    lo, hi = inst.support
    xs = np.linspace(lo, hi, args.x_points + 2)[1:-1]
    trials = int(float(args.trials))
    if trials < 1:
        raise UsageError("trials must be >= 1")
    cfg = SimulationConfig(trials, args.seed, tuple(xs), args.workers or default_workers())
    rep = estimate_asd(inst, built, cfg)
    if args.csv:
        rep.write_csv(args.csv)
    _emit(args, {"report": rep.to_dict()})
    return 0


def cmd_analysis_constants(args) -> int:
    from .analysis import compute_pt_constants, gamma_constants, hill_kertz_constant
    c = gamma_constants(_gamma(args.gamma))
    pt = compute_pt_constants()
    _emit(args, {
        "gamma": c.gamma,
        "beta": {"value": c.beta, "bracket": c.beta_bracket},
        "gamma_point": {"value": c.gamma_point, "bracket": c.gamma_point_bracket},
        "pt": {"alpha": pt.alpha, "alpha_bracket": pt.alpha_bracket, "gamma_pt": pt.gamma_pt},
        "hill_kertz": hill_kertz_constant(),
    })
    return 0


def cmd_analysis_lemma8(args) -> int:
    from .analysis import lemma8_integrals
    checks = lemma8_integrals()
    ok = all(c.passed for c in checks)
    _emit(args, {"checks": [c.to_dict() for c in checks], "passed": ok})
    return 0 if ok else 1


def cmd_analysis_wrapup(args) -> int:
    from .analysis import wrapup_bound
    gamma = _gamma(args.gamma)
    if not 0.0 <= args.c < 1.0:
        raise UsageError("c must lie in [0, 1)")
    val = wrapup_bound(gamma, args.c)
    _emit(args, {"gamma": gamma, "c": args.c, "bound": val, "below_one": val < 1.0})
    return 0


def cmd_secretary(args) -> int:
    from .secretary import HardnessInstance, convergence_table, optimal_policy_value
    if args.config:
        p = Path(args.config)
        if not p.exists():
            raise UsageError(f"config file not found: {args.config}")
        cfg = json.loads(p.read_text())
        base = HardnessInstance(int(cfg.get("N", 100_000)), float(cfg["a"]), cfg["b"], cfg["p"])
    else:
        base = HardnessInstance.published()
    if args.N is not None:
        base = HardnessInstance(int(float(args.N)), base.a, base.b, base.p)
    ev = optimal_policy_value(base)
    payload = {"N": ev.N, "opt": ev.opt, "max": ev.max_exp, "ratio": ev.ratio,
               "instance": {"a": base.a, "b": base.b, "p": base.p}}
    if args.convergence:
        Ns = [n for n in (100, 1000, 10_000, 100_000) if n <= base.N] or [base.N]
        payload["convergence"] = convergence_table(base, Ns)
    _emit(args, payload)
    return 0


def cmd_lp_asd(args) -> int:
    from .lp_asd import (FiniteInstance, best_single_ratio, extract_asd_mixture, solve_lp_pair,
                         solve_secretary_lp_pair)
    p = Path(args.instance)
    if not p.exists():
        raise UsageError(f"instance file not found: {args.instance}")
    data = json.loads(p.read_text())
    items = []
    for spec in data["items"]:
        if spec.get("kind") != "finite_support":
            raise UsageError("lp-asd needs finite_support items")
        items.append([tuple(x) for x in spec["params"]["points"]])
    fi = FiniteInstance.from_atoms(items)
    if args.setting == "prophet-secretary":
        sol = solve_secretary_lp_pair(fi)
    else:
        sol = solve_lp_pair(fi)
    mix = extract_asd_mixture(sol, support=fi.support)
    _emit(args, {
        "setting": args.setting,
        "alpha": sol.alpha, "mu": sol.mu, "duality_gap": sol.duality_gap,
        "alpha_exact": str(sol.alpha),
        "support": [float(a) for a in fi.support],
        "max_exceedance": sol.max_exceedance,
        "mixture": [{"weight": w, "algorithm": sol.labels[i].describe(fi.support)} for i, w in mix.weights],
        "mixture_exceedance": mix.exceedance,
        "residuals": mix.residuals,
        "min_residual": mix.min_residual,
        "best_single_ratio": best_single_ratio(sol),
        "note": "lambda* is the first optimum found; other optimal mixtures may exist",
    })
    return 0


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="prophet-order", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, instance=True, gamma=True):
        if instance:
            p.add_argument("--instance", required=True, help="instance JSON file")
        if gamma:
            p.add_argument("--gamma", default="0.7258", help="target ratio Gamma (default 0.7258)")
        p.add_argument("--out", help="write JSON here instead of stdout")

    sch = sub.add_parser("scheme", help="arrival-time schemes").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    b = sch.add_parser("build")
    common(b)
    b.add_argument("--c", type=float, default=0.28, help="kink of the warping map h")
    b.add_argument("--epsilon", type=float, default=1e-4, help="small slope of h near 0")
    b.add_argument("--grid-nodes", type=int, default=4096, help="uniform nodes of the time grid")
    b.set_defaults(func=cmd_scheme_build)
    ca = sch.add_parser("check-adverse")
    common(ca)
    ca.add_argument("--grid-nodes", type=int, default=4096, help="uniform nodes of the time grid")
    ca.set_defaults(func=cmd_scheme_check)

    sim = sub.add_parser("simulate", help="Monte-Carlo ASD estimate")
    common(sim)
    sim.add_argument("--trials", default="1e6", help="number of simulated games")
    sim.add_argument("--seed", type=int, default=0, help="root seed of the RNG streams")
    sim.add_argument("--workers", type=int, default=None,
                     help="threads (default: PROPHET_ORDER_WORKERS or 1); results do not depend on it")
    sim.add_argument("--x-points", type=int, default=20, help="probe points inside the value support")
    sim.add_argument("--grid-nodes", type=int, default=4096, help="uniform nodes of the time grid")
    sim.add_argument("--csv", help="also write the ASD curve as CSV")
    sim.set_defaults(func=cmd_simulate)

    an = sub.add_parser("analysis", help="appendix constants and bounds").add_subparsers(
        dest="action", required=True, parser_class=_Parser)
    c = an.add_parser("constants")
    common(c, instance=False)
    c.set_defaults(func=cmd_analysis_constants)
    v = an.add_parser("verify-lemma8")
    common(v, instance=False, gamma=False)
    v.set_defaults(func=cmd_analysis_lemma8)
    w = an.add_parser("wrapup")
    common(w, instance=False)
    w.add_argument("--c", type=float, default=0.28, help="kink of the warping map h")
    w.set_defaults(func=cmd_analysis_wrapup)

    sh = sub.add_parser("secretary-hardness", help="prophet-secretary hardness ratio")
    common(sh, instance=False, gamma=False)
    sh.add_argument("--config", help="JSON with N, a, b, p (defaults to the published table)")
    sh.add_argument("--N", default=None, help="number of IID items (overrides the config)")
    sh.add_argument("--convergence", action="store_true", help="add the N = 1e2..1e5 table")
    sh.set_defaults(func=cmd_secretary)

    lp = sub.add_parser("lp-asd", help="LP duality on a finite instance")
    common(lp, gamma=False)
    lp.add_argument("--setting", choices=["order-selection", "prophet-secretary"],
                    default="order-selection")
    lp.set_defaults(func=cmd_lp_asd)
    return ap


def dispatch(argv: Optional[list] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (VerificationFailure, ProphetOrderError) as exc:
        print(f"failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())

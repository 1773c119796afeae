"""``wdro`` command line interface.

Every command prints one JSON report on standard output::

    {"command", "config", "outputs", "rng", "schemaVersion", "seed", "version"}

``config`` echoes every option after defaults are filled in, so a report can
be replayed exactly.  Exit status is 0 on success, 2 on a usage error and 1
when the computation fails (the report then carries an ``error`` object).
Wall time is only added with ``--timing`` so that seeded runs stay
byte-identical.
"""

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from ._parallel import RNG_NAME
from .exceptions import WDROError
from .io import REPORT_SCHEMA_VERSION, dumps, load_dataset, read_matrix, write_csv


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated list of numbers: %r" % text)


def _unit(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError("must lie in (0, 1)")
    return v


def _nonneg(text):
    v = float(text)
    if not v >= 0.0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def _exponent(text):
    v = float(text)
    if not v >= 1.0:
        raise argparse.ArgumentTypeError("must be >= 1 (use inf for the max norm)")
    return v


def _regression_rows(args):
    """Rows ``[X, y]``; the response defaults to the last column."""
    if args.response is None:
        header, M = read_matrix(args.data)
        args.response = header[-1]
    ds = load_dataset(args.data, response=args.response)
    return ds.regression_rows()


def _features(args):
    return load_dataset(args.data).X


def _cost(args, default):
    from .ot import CostSpec

    q = default.q if getattr(args, "q", None) is None else args.q
    r = default.r if getattr(args, "r", None) is None else args.r
    a = getattr(args, "a", None)
    reg = default.regression_weight if a is None else a
    return CostSpec(q=q, r=r, coord_weights=default.coord_weights, regression_weight=reg)


# ------------------------------------------------------------------ commands

def cmd_ot(args):
    from .ot import CostSpec, DiscreteDistribution, transport_cost

    def dist(path):
        _, M = read_matrix(path)
        return DiscreteDistribution(M[:, :-1], M[:, -1])

    P, Q = dist(args.source), dist(args.target)
    val, cp = transport_cost(P, Q, CostSpec(q=args.q, r=args.r))
    return {"cost": val, "coupling": cp.matrix}


def cmd_risk(args):
    from .models import get_model
    from .worstcase import robust_risk_dual, robust_variance_dual

    theta = np.array(args.theta)
    if args.loss == "variance":
        X = _features(args)
        from .ot import CostSpec
        res = robust_variance_dual(X, theta, args.delta, _cost(args, CostSpec()))
    elif args.loss == "regression":
        model = get_model("regression")
        res = robust_risk_dual(model, _regression_rows(args), theta, args.delta,
                               _cost(args, model.default_cost()))
    else:
        model = get_model("portfolio")
        res = robust_risk_dual(model, _features(args), theta, args.delta,
                               _cost(args, model.default_cost()))
    return res.to_dict()


def _algorithm1(args, model, Z, theta=None):
    from .radius import estimate_radius

    delta, qe, info = estimate_radius(model, Z, args.alpha, k=args.k, seed=args.seed,
                                      theta=theta, p=args.p)
    args.k = qe.k
    return delta, {"radius": {"delta": delta, **qe.to_dict(), "flags": info["flags"]}}


def cmd_fit(args):
    from .estimators import fit_dr_mean_variance, fit_sqrt_lasso
    from .models import get_model

    extra = {}
    if args.loss == "regression":
        Z = _regression_rows(args)
        delta = args.delta
        if delta is None:
            delta, extra = _algorithm1(args, get_model("regression"), Z)
        res = fit_sqrt_lasso(Z, delta, args.p)
    else:
        if args.target_return is None:
            raise UsageError("--loss portfolio needs --target-return")
        X = _features(args)
        delta = args.delta
        if delta is None:
            # the portfolio estimating function does not depend on theta; its
            # limit law is the one of the mean, so Algorithm 1 runs on the mean model
            delta, extra = _algorithm1(args, get_model("mean"), X)
        res = fit_dr_mean_variance(X, delta, args.target_return, args.p)
    args.delta = delta
    return {**res.to_dict(), **extra}


def cmd_profile(args):
    from .models import get_model
    from .ot import CostSpec
    from .profile import profile_value

    model = get_model(args.model)
    Z = _regression_rows(args) if args.model == "regression" else _features(args)
    cost = model.default_cost()
    cost = CostSpec(q=args.q, r=cost.r, coord_weights=cost.coord_weights,
                    regression_weight=cost.regression_weight)
    return profile_value(model, Z, np.array(args.theta), cost).to_dict()


def cmd_radius(args):
    from .models import get_model
    from .radius import sqrt_lasso_radius

    if args.highdim:
        if args.n is None or args.d is None:
            raise UsageError("--highdim needs --n and --d")
        s, d = sqrt_lasso_radius(args.n, args.d, args.alpha)
        return {"sqrtDelta": s, "delta": d, "n": args.n, "d": args.d, "alpha": args.alpha}
    if args.data is None:
        raise UsageError("radius needs --data (or --highdim)")
    model = get_model(args.model)
    Z = _regression_rows(args) if args.model == "regression" else _features(args)
    delta, out = _algorithm1(args, model, Z)
    r = out["radius"]
    return {"delta": delta, "eta": r["eta"], "alpha": r["alpha"], "k": r["k"], "seed": r["seed"],
            "quantileIndex": r["quantileIndex"], "flags": r["flags"]}


def cmd_region(args):
    from .inference import build_region
    from .models import get_model

    Z = _regression_rows(args)
    hs, ell, info = build_region(get_model("regression"), Z, args.alpha, k=args.k, seed=args.seed,
                                 draws=args.draws, p=args.p)
    args.draws = info["quantile"].k
    out = {"halfspace": hs.to_dict(), "eta": info["eta"], "quantile": info["quantile"].to_dict()}
    if ell is not None:
        out["ellipsoid"] = ell.to_dict()
    return out


def cmd_test_fairness(args):
    from .fairness import fairness_test

    ds = load_dataset(args.data, attribute=args.attribute, label=args.label)
    return fairness_test(ds.X, ds.attribute, ds.label, np.array(args.theta), args.alpha,
                         q=args.q).to_dict()


def cmd_simulate(args):
    from . import simlab

    with open(args.config, encoding="utf-8") as fh:
        raw = json.load(fh)
    if args.kind == "infsup":
        return _infsup(raw, args)
    cfg = simlab.SimConfig.from_dict(raw)
    args.resolved = cfg.to_dict()
    if args.kind == "scatter":
        summary, rows = simlab.simulate_scatter(cfg)
        if args.csv:
            write_csv(args.csv, rows)
        return summary
    if args.kind == "clt":
        c = float(raw.get("c", 1.0))
        gamma = float(raw.get("gamma", 1.0))
        grid = raw.get("nGrid")
        args.resolved.update({"c": c, "gamma": gamma, "nGrid": grid})
        return simlab.simulate_clt(cfg, c=c, gamma=gamma, n_grid=grid)
    alpha = float(raw.get("alpha", 0.1))
    kd = int(raw.get("kDirections", 200))
    args.resolved.update({"alpha": alpha, "kDirections": kd})
    return simlab.simulate_coverage(cfg, alpha=alpha, k_dirs=kd)


def _infsup(raw, args):
    from . import simlab
    from ._parallel import stream

    if "seed" not in raw:
        raise ValueError("config needs a seed")
    seed = int(raw["seed"])
    count = int(raw.get("instances", 20))
    atoms = int(raw.get("atoms", 3))
    grid = int(raw.get("gridPoints", 41))
    args.resolved = {"seed": seed, "instances": count, "atoms": atoms, "gridPoints": grid}
    out = []
    for i in range(count):
        game = simlab.random_game(stream(seed, 4, i), k=atoms)
        coarse = simlab.infsup_gap(game, grid)
        fine = simlab.infsup_gap(game, 2 * grid - 1)
        out.append({"instance": i, "coarse": coarse, "refined": fine})
    ok = all(o["coarse"]["gap"] <= 2 * o["coarse"]["bound"] for o in out)
    halves = all(o["refined"]["bound"] <= 0.5 * o["coarse"]["bound"] * (1 + 1e-12) for o in out)
    return {"instances": out, "gapWithinTwiceBound": ok, "boundHalves": halves}


def cmd_bound(args):
    from .simlab import finite_sample_bound

    return {"bound": finite_sample_bound(args.M, args.L, args.diam, args.r, args.dudley_c,
                                         args.delta, args.eps, args.n)}


# ------------------------------------------------------------------ parser

class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p, seed=False):
    p.add_argument("--timing", action="store_true", help="add wall time to the report")
    if seed:
        p.add_argument("--seed", type=int, default=0)


def build_parser():
    ap = _Parser(prog="wdro", description="Wasserstein distributionally robust estimation and inference.")
    ap.add_argument("--version", action="version", version="wdro " + __version__)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("ot", help="optimal transport cost between two discrete distributions")
    p.add_argument("--source", required=True, help="CSV, one atom per row, last column weight")
    p.add_argument("--target", required=True)
    p.add_argument("--q", type=_exponent, default=2.0)
    p.add_argument("--r", type=_exponent, default=2.0)
    _common(p)
    p.set_defaults(func=cmd_ot)

    p = sub.add_parser("risk", help="worst-case risk through the dual")
    p.add_argument("--data", required=True)
    p.add_argument("--theta", type=_floats, required=True)
    p.add_argument("--delta", type=_nonneg, required=True)
    p.add_argument("--loss", choices=["portfolio", "variance", "regression"], default="regression")
    p.add_argument("--q", type=_exponent, default=None)
    p.add_argument("--r", type=_exponent, default=None)
    p.add_argument("--a", type=float, default=None, help="response transport weight (regression)")
    p.add_argument("--response", default=None)
    _common(p)
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("fit", help="distributionally robust estimator")
    p.add_argument("--data", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--delta", type=_nonneg)
    g.add_argument("--alpha", type=_unit, help="choose delta by the limit-law quantile")
    p.add_argument("--loss", choices=["regression", "portfolio"], default="regression")
    p.add_argument("--p", type=_exponent, default=2.0)
    p.add_argument("--target-return", type=float, default=None)
    p.add_argument("--k", type=int, default=None, help="Monte Carlo draws for --alpha")
    p.add_argument("--response", default=None)
    _common(p, seed=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("profile", help="profile function at theta")
    p.add_argument("--data", required=True)
    p.add_argument("--theta", type=_floats, required=True)
    p.add_argument("--model", choices=["mean", "regression"], default="mean")
    p.add_argument("--q", type=_exponent, default=2.0)
    p.add_argument("--response", default=None)
    _common(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("radius", help="radius from the limit law, or the high-dimensional rule")
    p.add_argument("--data")
    p.add_argument("--alpha", type=_unit, required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--model", choices=["mean", "regression"], default="regression")
    p.add_argument("--p", type=_exponent, default=2.0)
    p.add_argument("--response", default=None)
    p.add_argument("--highdim", action="store_true")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    _common(p, seed=True)
    p.set_defaults(func=cmd_radius)

    p = sub.add_parser("region", help="confidence region for regression coefficients")
    p.add_argument("--data", required=True)
    p.add_argument("--alpha", type=_unit, required=True)
    p.add_argument("--k", type=int, default=2000, help="number of directions")
    p.add_argument("--draws", type=int, default=None, help="Monte Carlo draws for the quantile")
    p.add_argument("--p", type=_exponent, default=2.0)
    p.add_argument("--response", default=None)
    _common(p, seed=True)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("test-fairness", help="equal-opportunity test for a logistic classifier")
    p.add_argument("--data", required=True)
    p.add_argument("--theta", type=_floats, required=True)
    p.add_argument("--alpha", type=_unit, default=0.05)
    p.add_argument("--attribute", default="a")
    p.add_argument("--label", default="y")
    p.add_argument("--q", type=_exponent, default=2.0)
    _common(p)
    p.set_defaults(func=cmd_test_fairness)

    p = sub.add_parser("simulate", help="Monte Carlo experiments from a JSON config")
    p.add_argument("kind", choices=["scatter", "clt", "coverage", "infsup"])
    p.add_argument("--config", required=True)
    p.add_argument("--csv", default=None, help="per-replication table (scatter)")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bound", help="finite-sample guarantee for a fixed radius")
    for name in ("--M", "--L", "--diam", "--dudley-c", "--delta", "--eps"):
        p.add_argument(name, type=float, required=True)
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--n", type=int, required=True)
    _common(p)
    p.set_defaults(func=cmd_bound)
    return ap


def _config(args):
    skip = {"func", "timing", "resolved"}
    out = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    if getattr(args, "resolved", None) is not None:
        out["resolved"] = args.resolved
    return out


def run(argv=None, stdout=None, stderr=None):
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        stderr.write(parser.format_usage())
        stderr.write("wdro: error: %s\n" % e)
        return 2
    except SystemExit as e:  # --help / --version
        return int(e.code or 0)
    t0 = time.perf_counter()
    report = {"command": args.command, "version": __version__,
              "schemaVersion": REPORT_SCHEMA_VERSION, "rng": RNG_NAME,
              "seed": getattr(args, "seed", None)}
    try:
        outputs = args.func(args)
        code = 0
        report["outputs"] = outputs
    except UsageError as e:
        stderr.write(parser.format_usage())
        stderr.write("wdro %s: error: %s\n" % (args.command, e))
        return 2
    except (WDROError, ValueError, OSError, np.linalg.LinAlgError) as e:
        code = 1
        report["error"] = {"type": getattr(e, "code", type(e).__name__), "message": str(e)}
    report["config"] = _config(args)
    if args.timing:
        report["wallTime"] = time.perf_counter() - t0
    stdout.write(dumps(report) + "\n")
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()

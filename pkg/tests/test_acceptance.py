"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected into the terminal summary, so ``pytest -v``
shows them together at the end of the run.
"""

import io
import json
import math
import os
import time

import numpy as np
from scipy import stats

from wdro.cli import run
from wdro.fairness import fairness_test, null_sample
from wdro.models import MeanModel, PortfolioModel, RegressionModel
from wdro.ot import CostSpec, DiscreteDistribution, worstcase_expectation_dual, worstcase_expectation_primal
from wdro.profile import profile_value
from wdro.radius import estimate_radius
from wdro.simlab import SimConfig, infsup_gap, random_game, simulate_clt, simulate_coverage, simulate_scatter
from wdro.worstcase import (expansion_check, robust_risk_dual, robust_variance_dual, wc_portfolio_return,
                            wc_regression_risk, wc_variance)
from wdro._parallel import stream

from oracles import example7_oracle, grid_points, profile_grid_lp

RESULTS = []


def _report(num, ok, detail):
    line = "criterion %2d %s: %s" % (num, "PASS" if ok else "FAIL", detail)
    RESULTS.append(line)
    print(line)
    assert ok, line


def _close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def test_criterion_01_strong_duality():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(200):
        k = int(rng.integers(1, 7))
        K = int(rng.integers(0, 7 - k))
        m = int(rng.integers(1, 4))
        P = DiscreteDistribution(rng.normal(size=(k, m)), rng.dirichlet(np.ones(k)))
        cand = rng.normal(size=(K, m)) if K else None
        f = rng.normal(size=k + K)
        cost = CostSpec(q=float(rng.choice([1.0, 2.0, math.inf])), r=float(rng.choice([1.0, 2.0])))
        delta = float(rng.uniform(0, 2))
        primal, _ = worstcase_expectation_primal(f, P, delta, cost, candidates=cand)
        dual, _ = worstcase_expectation_dual(f, P, delta, cost, candidates=cand)
        worst = max(worst, abs(primal - dual))
    dt = time.perf_counter() - t0
    _report(1, worst <= 1e-8 and dt < 5, "max |primal - dual| = %.2e over 200 instances, %.2f s" % (worst, dt))


def _qconj(p):
    return math.inf if p == 1 else (1.0 if math.isinf(p) else p / (p - 1))


def test_criterion_02_closed_forms():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    worst = {"portfolio": 0.0, "variance": 0.0, "regression": 0.0}
    ps = [1.0, 2.0, 3.0, math.inf]
    X = rng.normal(size=(40, 3))
    Z = rng.normal(size=(40, 3))
    for i in range(100):
        p = ps[i % 4]
        theta, delta = rng.normal(size=3), float(rng.uniform(0, 2))
        v = robust_risk_dual(PortfolioModel(), X, theta, delta, CostSpec(q=_qconj(p))).value
        cf = wc_portfolio_return(theta, X.mean(0), delta, p)
        worst["portfolio"] = max(worst["portfolio"], abs(v - cf) / max(1.0, abs(cf)))
        v = robust_variance_dual(X, theta, delta, CostSpec(q=_qconj(p))).value
        cf = wc_variance(theta, float(np.std(X @ theta)), delta, p)
        worst["variance"] = max(worst["variance"], abs(v - cf) / max(1.0, abs(cf)))
        a = [math.inf, 0.5, 4.0][i % 3]
        th2 = theta[:2]
        v = robust_risk_dual(RegressionModel(), Z, th2, delta, CostSpec(q=_qconj(p), regression_weight=a)).value
        cf = wc_regression_risk(th2, Z, delta, p, a)
        worst["regression"] = max(worst["regression"], abs(v - cf) / max(1.0, abs(cf)))
    dt = time.perf_counter() - t0
    ok = max(worst.values()) <= 1e-8 and dt < 10
    _report(2, ok, "max scaled error %s, %.2f s" % (
        ", ".join("%s %.1e" % kv for kv in worst.items()), dt))


def test_criterion_03_profile():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    worst_cf = 0.0
    for _ in range(100):
        n, d = int(rng.integers(3, 30)), int(rng.integers(1, 5))
        X = rng.normal(size=(n, d))
        theta = X.mean(0) + rng.normal(size=d)
        pv = profile_value(MeanModel(), X, theta, check_interior=False).value
        ref = float(np.sum((X.mean(0) - theta) ** 2))
        worst_cf = max(worst_cf, abs(pv - ref))
    worst_lp = 0.0
    for _ in range(20):
        atoms = rng.normal(size=(3, 2))
        theta = rng.dirichlet(np.ones(3)) @ atoms
        # the box must contain the optimal transport targets, hence the wide margin
        grid = grid_points(atoms.min(0) - 2.5, atoms.max(0) + 2.5, 121, 2)
        lp = profile_grid_lp(lambda P: theta - P, atoms, grid)
        worst_lp = max(worst_lp, abs(profile_value(MeanModel(), atoms, theta).value - lp))
    dt = time.perf_counter() - t0
    ok = worst_cf <= 1e-10 and worst_lp <= 2e-3 and dt < 30
    _report(3, ok, "closed form %.1e, grid LP %.1e, %.2f s" % (worst_cf, worst_lp, dt))


def test_criterion_04_limit_law():
    t0 = time.perf_counter()
    rng = np.random.default_rng(404)
    n = 20000
    X = rng.standard_normal((n, 3))
    y = rng.standard_normal(n)
    _, qe, _ = estimate_radius(RegressionModel(), np.column_stack([X, y]), 0.1, k=100000, seed=7)
    ref = float(stats.chi2.ppf(0.9, 3))
    rel = abs(qe.eta - ref) / ref
    dt = time.perf_counter() - t0
    _report(4, rel <= 0.02 and dt < 10, "eta %.4f vs chi2_3 %.4f (rel %.2e), %.2f s" % (qe.eta, ref, rel, dt))


def _cli(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, stdout=out, stderr=err)
    return code, out.getvalue()


def test_criterion_05_highdim_radius():
    rng = np.random.default_rng(505)
    worst = 0.0
    for _ in range(20):
        n, d = int(rng.integers(10, 10 ** 6)), int(rng.integers(1, 500))
        alpha = float(rng.uniform(0.001, 0.125))
        code, out = _cli(["radius", "--highdim", "--n", str(n), "--d", str(d), "--alpha", repr(alpha)])
        got = json.loads(out)["outputs"]["sqrtDelta"] if code == 0 else math.nan
        worst = max(worst, abs(got - example7_oracle(n, d, alpha)))
    _report(5, worst <= 1e-8, "max |cli - mpmath| = %.2e over 20 triples" % worst)


def test_criterion_06_expansion():
    rng = np.random.default_rng(606)
    X = rng.normal(size=(50, 2))
    Z = np.column_stack([X, X @ [0.5, -1.0] + rng.normal(size=50)])
    theta = np.array([0.4, -0.8])
    deltas = [10.0 ** -j for j in range(2, 7)]
    reg = expansion_check(RegressionModel(), Z, theta, RegressionModel().default_cost(), deltas)
    ratios = np.array([abs(r["ratio"]) for r in reg])
    bound = 1.5 * ratios[0]
    port = expansion_check(PortfolioModel(), X, theta, CostSpec(), deltas)
    port_res = max(abs(r["residual"]) for r in port)
    ok = bool(np.all(ratios <= bound)) and port_res <= 1e-10
    _report(6, ok, "regression |residual|/delta in [%.4f, %.4f]; portfolio residual %.1e" % (
        ratios.min(), ratios.max(), port_res))


def test_criterion_07_clt_regimes():
    t0 = time.perf_counter()
    cfg = SimConfig(theta_star=(0.5, 0.5), rho=0.0, n=2000, reps=2000, seed=7)
    r1 = simulate_clt(cfg, c=1.0, gamma=1.0)
    z = np.abs(r1["zScores"])
    cfg2 = SimConfig(theta_star=(0.5, 0.5), rho=0.0, reps=200, seed=8)
    grid = [400 * 2 ** j for j in range(7)]
    r2 = simulate_clt(cfg2, c=1.0, gamma=0.5, n_grid=grid)
    cfg3 = SimConfig(theta_star=(0.5, 0.5), rho=0.0, n=6400, reps=200, seed=9)
    r3 = simulate_clt(cfg3, c=1.0, gamma=2.0)
    gap = r3["levels"][-1]["meanGapNorm"]
    dt = time.perf_counter() - t0
    ok = bool(np.all(z <= 3)) and -0.35 <= r2["slope"] <= -0.15 and gap < 0.05 and dt < 600
    _report(7, ok, "(i) |z| = %s; (ii) slope %.3f; (iii) sqrt(n) gap %.4f; %.1f s" % (
        np.round(z, 2).tolist(), r2["slope"], gap, dt))


def test_criterion_08_coverage():
    t0 = time.perf_counter()
    cfg = SimConfig(theta_star=(0.5, 0.5), rho=0.0, n=100, reps=1000, seed=11)
    rep = simulate_coverage(cfg, alpha=0.1)
    cov = rep["coverageThetaStar"]
    se = math.sqrt(0.9 * 0.1 / cfg.reps)
    dt = time.perf_counter() - t0
    ok = cov >= 0.9 - 3 * se and rep["nestedAll"] and dt < 300
    _report(8, ok, "coverage %.3f (floor %.3f), nested in every replication: %s, %.1f s" % (
        cov, 0.9 - 3 * se, rep["nestedAll"], dt))


def test_criterion_09_scatter():
    parts, ok = [], True
    for rho in (0.95, -0.95, 0.0):
        cfg = SimConfig(theta_star=(0.5, 0.5), rho=rho, n=100, reps=1000, seed=13)
        s, _ = simulate_scatter(cfg)
        ratio = s["varianceRatio"]
        if rho != 0.0:
            ok &= max(ratio) < 1 and s["meanNormDro"] < s["meanNormErm"]
        parts.append("rho %+.2f ratio [%.3f, %.3f] norms %.3f/%.3f" % (
            rho, ratio[0], ratio[1], s["meanNormDro"], s["meanNormErm"]))
    _report(9, ok, "; ".join(parts))


def test_criterion_10_fairness_size():
    t0 = time.perf_counter()
    reps = 2000
    theta = np.array([1.0, 0.5])
    rejections = 0
    for r in range(reps):
        X, a, y = null_sample(500, 2, stream(17, 5, r))
        rejections += fairness_test(X, a, y, theta, alpha=0.05).decision == "reject"
    rate = rejections / reps
    dt = time.perf_counter() - t0
    _report(10, 0.03 <= rate <= 0.07 and dt < 600, "rejection rate %.4f over %d replications, %.1f s" % (
        rate, reps, dt))


def test_criterion_11_infsup():
    gaps, halves = [], []
    for i in range(20):
        game = random_game(stream(19, 4, i))
        coarse = infsup_gap(game, 41)
        fine = infsup_gap(game, 81)
        gaps.append(coarse["gap"] / (2 * coarse["bound"]))
        halves.append(fine["bound"] <= 0.5 * coarse["bound"] * (1 + 1e-12))
    ok = max(gaps) <= 1 and all(halves)
    _report(11, ok, "max gap/(2 bound) = %.3f, bound halves in %d/20" % (max(gaps), sum(halves)))


def test_criterion_12_determinism(tmp_path):
    rng = np.random.default_rng(1212)
    X = rng.normal(size=(80, 2))
    reg = tmp_path / "reg.csv"
    np.savetxt(reg, np.column_stack([X, X @ [0.5, 0.5] + rng.normal(size=80)]), delimiter=",",
               header="x1,x2,y", comments="", fmt="%.17g")
    ret = tmp_path / "ret.csv"
    np.savetxt(ret, 0.05 + 0.1 * rng.normal(size=(80, 2)), delimiter=",", header="r1,r2",
               comments="", fmt="%.17g")
    cfgs = {}
    base = {"modelSpec": {"thetaStar": [0.5, 0.5], "rho": 0.5}, "n": 60, "reps": 6, "seed": 3}
    for kind, extra in [("scatter", {}), ("coverage", {"alpha": 0.1, "kDirections": 40}),
                        ("clt", {"gamma": 1.0, "nGrid": [50, 100]}),
                        ("infsup", {"instances": 3})]:
        path = tmp_path / (kind + ".json")
        path.write_text(json.dumps({**base, **extra}))
        cfgs[kind] = str(path)
    commands = [
        ["fit", "--data", str(reg), "--alpha", "0.1", "--seed", "5", "--k", "3000"],
        ["fit", "--data", str(ret), "--loss", "portfolio", "--alpha", "0.1", "--target-return", "0.0",
         "--seed", "5"],
        ["radius", "--data", str(reg), "--alpha", "0.1", "--seed", "6"],
        ["region", "--data", str(reg), "--alpha", "0.1", "--k", "100", "--seed", "7"],
    ] + [["simulate", kind, "--config", p] for kind, p in cfgs.items()]
    old = os.environ.get("WDRO_THREADS")
    bad = []
    try:
        for argv in commands:
            outs = []
            for threads in ("1", "1", "4", "4"):
                os.environ["WDRO_THREADS"] = threads
                code, out = _cli(argv)
                outs.append((code, out))
            if outs[0][0] != 0 or any(o != outs[0] for o in outs):
                bad.append(" ".join(argv[:2]))
    finally:
        if old is None:
            os.environ.pop("WDRO_THREADS", None)
        else:
            os.environ["WDRO_THREADS"] = old
    _report(12, not bad, "%d seeded commands byte-identical across repeats and thread counts%s" % (
        len(commands) - len(bad), "; differing: " + ", ".join(bad) if bad else ""))

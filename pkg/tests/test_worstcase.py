import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from wdro.models import MeanModel, PortfolioModel, RegressionModel
from wdro.norms import holder_direction
from wdro.ot import CostSpec, DiscreteDistribution, worstcase_expectation_primal
from wdro.worstcase import (expansion_check, robust_risk_dual, robust_variance_dual,
                            variation_norm, wc_portfolio_return, wc_regression_risk, wc_variance)

P_VALUES = [1.0, 1.5, 2.0, 3.0, math.inf]


def _q(p):
    return math.inf if p == 1 else (1.0 if math.isinf(p) else p / (p - 1))


def test_portfolio_closed_form_examples():
    assert wc_portfolio_return([1, 0], [0.1, 0.2], 0.0, 2) == pytest.approx(-0.1)
    assert wc_portfolio_return([1, 0], [0.1, 0.2], 4.0, 2) == pytest.approx(1.9)


def test_variance_closed_form_examples():
    assert wc_variance([1.0, 0.0], 2.0, 0.0, 2) == pytest.approx(4.0)
    assert wc_variance([1.0, 0.0], 2.0, 1.0, 2) == pytest.approx(9.0)
    with pytest.raises(ValueError):
        wc_variance([1.0], -1.0, 1.0, 2)


@pytest.mark.parametrize("p", P_VALUES)
def test_dual_matches_portfolio_closed_form(p):
    rng = np.random.default_rng(int(10 * p) if math.isfinite(p) else 99)
    X = rng.normal(size=(40, 3))
    for _ in range(20):
        theta, delta = rng.normal(size=3), rng.uniform(0, 2)
        rr = robust_risk_dual(PortfolioModel(), X, theta, delta, CostSpec(q=_q(p)))
        assert rr.value == pytest.approx(wc_portfolio_return(theta, X.mean(0), delta, p), abs=1e-9)


@pytest.mark.parametrize("p", [1.0, 2.0, math.inf])
def test_dual_matches_variance_closed_form(p):
    rng = np.random.default_rng(5)
    X = rng.normal(size=(30, 3))
    for _ in range(5):
        theta, delta = rng.normal(size=3), rng.uniform(0, 1)
        rr = robust_variance_dual(X, theta, delta, CostSpec(q=_q(p)))
        sd = float(np.std(X @ theta))
        assert rr.value == pytest.approx(wc_variance(theta, sd, delta, p), abs=1e-8)


@pytest.mark.parametrize("p", P_VALUES)
@pytest.mark.parametrize("a", [math.inf, 0.5, 4.0])
def test_dual_matches_regression_closed_form(p, a):
    rng = np.random.default_rng(7)
    Z = rng.normal(size=(25, 3))
    for _ in range(10):
        theta, delta = rng.normal(size=2), rng.uniform(0, 1)
        cost = CostSpec(q=_q(p), regression_weight=a)
        rr = robust_risk_dual(RegressionModel(), Z, theta, delta, cost)
        assert rr.value == pytest.approx(wc_regression_risk(theta, Z, delta, p, a), rel=1e-9, abs=1e-9)


def test_zero_radius_is_empirical_risk():
    rng = np.random.default_rng(9)
    Z = rng.normal(size=(12, 3))
    for model, theta in [(PortfolioModel(), rng.normal(size=3)), (RegressionModel(), rng.normal(size=2)),
                         (MeanModel(), rng.normal(size=3))]:
        rr = robust_risk_dual(model, Z, theta, 0.0)
        assert rr.value == pytest.approx(model.loss(Z, theta).mean(), abs=1e-12)


def test_regression_dual_against_grid_lp():
    """Three atoms, worst case over a fine grid of candidate points with the response pinned."""
    rng = np.random.default_rng(13)
    Z = rng.normal(size=(3, 2))  # one feature and the response
    theta = np.array([0.7])
    delta = 0.2
    grid = np.linspace(-4, 4, 801)
    cand = np.array([[g, z[1]] for z in Z for g in grid])
    pref = DiscreteDistribution(Z, np.full(3, 1 / 3))
    cost = CostSpec(2, 2, regression_weight=math.inf)
    f = lambda W: (W[:, 1] - theta[0] * W[:, 0]) ** 2
    lp, _ = worstcase_expectation_primal(f, pref, delta, cost, cand)
    rr = robust_risk_dual(RegressionModel(), Z, theta, delta, cost)
    assert rr.value >= lp - 1e-12
    assert rr.value == pytest.approx(lp, abs=2e-3)


def test_monotone_concave_in_delta():
    rng = np.random.default_rng(17)
    Z = rng.normal(size=(20, 3))
    theta = rng.normal(size=2)
    grid = np.linspace(0, 1, 21)
    v = np.array([robust_risk_dual(RegressionModel(), Z, theta, d).value for d in grid])
    assert (np.diff(v) >= -1e-12).all()
    assert (np.diff(v, 2) <= 1e-9).all()


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 4.0, math.inf])
def test_holder_direction_attains_inner_sup(p):
    rng = np.random.default_rng(19)
    theta = rng.normal(size=4)
    delta = 0.3
    q = _q(p)
    D = holder_direction(theta, p)
    nt = np.linalg.norm(theta, p)
    nq = np.max(np.abs(D)) if math.isinf(q) else np.sum(np.abs(D) ** q) ** (1 / q)
    assert nq == pytest.approx(nt, rel=1e-12)
    assert float(D @ theta) == pytest.approx(nt ** 2, rel=1e-12)
    # moving every sample by -sqrt(delta) D / ||theta||_p spends the budget exactly
    # and attains the portfolio closed form
    X = rng.normal(size=(6, 4))
    moved = X - math.sqrt(delta) * D / nt
    assert float(np.mean(-moved @ theta)) == pytest.approx(
        wc_portfolio_return(theta, X.mean(0), delta, p), abs=1e-9)


def test_variation_norm_cases():
    rng = np.random.default_rng(23)
    X = rng.normal(size=(10, 3))
    theta = rng.normal(size=3)
    for p in P_VALUES:
        assert variation_norm(PortfolioModel(), X, theta, p) == pytest.approx(np.linalg.norm(theta, p))
    assert variation_norm(PortfolioModel(), X, np.zeros(3), 2) == 0.0


def test_variation_norm_regression_by_finite_differences():
    rng = np.random.default_rng(29)
    Z = rng.normal(size=(15, 3))
    theta = rng.normal(size=2)
    model = RegressionModel()
    eps = 1e-6
    G = np.zeros((15, 2))
    for j in range(2):
        E = np.zeros_like(Z)
        E[:, j] = eps
        G[:, j] = (model.loss(Z + E, theta) - model.loss(Z - E, theta)) / (2 * eps)
    for p in [1.0, 2.0, math.inf]:
        direct = math.sqrt(np.mean(np.linalg.norm(G, p, axis=1) ** 2))
        assert variation_norm(model, Z, theta, p) == pytest.approx(direct, rel=1e-7)


def test_expansion_portfolio_is_exact():
    rng = np.random.default_rng(31)
    X = rng.normal(size=(20, 3))
    theta = rng.normal(size=3)
    rows = expansion_check(PortfolioModel(), X, theta, CostSpec(), [0.0, 1e-2, 1e-4, 1.0])
    assert max(abs(r["residual"]) for r in rows) <= 1e-10


def test_expansion_regression_bounded_ratio():
    rng = np.random.default_rng(37)
    Z = rng.normal(size=(50, 3))
    theta = np.array([0.4, -0.3])
    deltas = [10.0 ** -k for k in range(2, 7)]
    rows = expansion_check(RegressionModel(), Z, theta, RegressionModel().default_cost(), deltas)
    ratios = np.array([r["ratio"] for r in rows])
    # for this loss the residual is exactly delta * ||theta||^2, so the ratio is flat
    assert_allclose(ratios, np.dot(theta, theta), rtol=1e-5)

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import linprog

from wdro.exceptions import OutsideThetaTilde, UnsupportedLoss
from wdro.models import MeanModel, PortfolioModel, RegressionModel
from wdro.ot import CostSpec
from wdro.profile import hull_margin, in_theta_tilde, profile_value, scaled_profile_stat

from oracles import grid_points, profile_grid_lp


def test_mean_closed_form_random():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n, d = rng.integers(3, 30), rng.integers(1, 4)
        X = rng.normal(size=(n, d))
        theta = X.mean(0) + 0.3 * rng.normal(size=d)
        pv = profile_value(MeanModel(), X, theta, check_interior=False)
        assert pv.value == pytest.approx(np.sum((X.mean(0) - theta) ** 2), abs=1e-10)


def test_scaled_statistic_hand_value():
    X = np.array([[-1.0, 1.0], [1.0, -1.0], [2.0, 1.5], [2.0, -1.5]])
    theta = X.mean(0) - np.array([0.5, 0.0])
    assert scaled_profile_stat(MeanModel(), X, theta) == pytest.approx(1.0, abs=1e-10)


def test_zero_on_empirical_manifold():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(20, 2))
    assert profile_value(MeanModel(), X, X.mean(0)).value <= 1e-10
    Z = rng.normal(size=(30, 3))
    theta = RegressionModel().fit_erm(Z)
    assert profile_value(RegressionModel(), Z, theta).value <= 1e-10


def test_mean_against_grid_lp():
    rng = np.random.default_rng(2)
    for _ in range(3):
        atoms = rng.normal(size=(3, 2))
        theta = rng.dirichlet(np.ones(3)) @ atoms
        grid = grid_points(atoms.min(0) - 1, atoms.max(0) + 1, 61, 2)
        lp = profile_grid_lp(lambda P: theta - P, atoms, grid)
        pv = profile_value(MeanModel(), atoms, theta)
        assert pv.value <= lp + 1e-9
        assert pv.value == pytest.approx(lp, abs=2e-3)


def test_regression_against_grid_lp():
    """Three atoms, response pinned, features moved on a fine 1-D grid per atom."""
    rng = np.random.default_rng(3)
    Z = rng.normal(size=(3, 2))
    theta = np.array([0.4])
    grid = np.linspace(-5, 5, 2001)
    n, K = 3, grid.size
    C = (Z[:, [0]] - grid[None, :]) ** 2  # cost from atom i to (g, y_i)
    H = -2 * (Z[:, [1]] - theta[0] * grid[None, :]) * grid[None, :]  # h at (g, y_i)
    A = np.zeros((n + 1, n * K))
    for i in range(n):
        A[i, i * K:(i + 1) * K] = 1.0
        A[n, i * K:(i + 1) * K] = H[i]
    res = linprog(C.ravel(), A_eq=A, b_eq=np.r_[np.full(n, 1 / n), 0.0], bounds=(0, None),
                  method="highs")
    pv = profile_value(RegressionModel(), Z, theta, check_interior=False)
    assert pv.value == pytest.approx(res.fun, abs=2e-3)


def test_multistart_agrees():
    rng = np.random.default_rng(4)
    Z = rng.normal(size=(40, 3))
    theta = RegressionModel().fit_erm(Z) + 0.2
    a = profile_value(RegressionModel(), Z, theta)
    b = profile_value(RegressionModel(), Z, theta, multistart=True)
    assert a.value == pytest.approx(b.value, abs=1e-8)


def test_affine_closed_form_general_q():
    """For h = theta - x the cheapest plan shifts every atom by the same vector."""
    rng = np.random.default_rng(5)
    X = rng.normal(size=(15, 3))
    theta = X.mean(0) + 0.1 * rng.normal(size=3)
    for q in (1.0, 3.0, math.inf):
        pv = profile_value(MeanModel(), X, theta, CostSpec(q=q))
        shift = theta - X.mean(0)
        nq = np.abs(shift).max() if math.isinf(q) else np.sum(np.abs(shift) ** q) ** (1 / q)
        assert pv.value == pytest.approx(nq ** 2, rel=1e-10)


def test_portfolio_profile_is_mean_distance():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(10, 2))
    # portfolio h = -x does not depend on theta; zero is interior only if the sample surrounds it
    if in_theta_tilde(PortfolioModel(), X, np.zeros(2)):
        pv = profile_value(PortfolioModel(), X, np.zeros(2))
        assert pv.value == pytest.approx(np.sum(X.mean(0) ** 2), abs=1e-10)


def test_outside_theta_tilde():
    X = np.array([[1.0, 0.0], [2.0, 1.0], [3.0, -1.0]])
    with pytest.raises(OutsideThetaTilde):
        profile_value(MeanModel(), X, np.array([-1.0, 0.0]))
    assert hull_margin(np.array([[1.0], [2.0]])) == -math.inf


def test_r_not_two_rejected():
    X = np.random.default_rng(7).normal(size=(5, 1))
    with pytest.raises(UnsupportedLoss):
        profile_value(MeanModel(), X, X.mean(0), CostSpec(r=1.0))


def test_nonnegative_and_concave_dual_maximized():
    rng = np.random.default_rng(8)
    Z = rng.normal(size=(25, 3))
    theta = np.array([0.8, -0.4])
    pv = profile_value(RegressionModel(), Z, theta)
    assert pv.value >= 0
    from wdro.profile import _QuadraticDual
    cost = RegressionModel().default_cost()
    w = cost.weights(3)
    dual = _QuadraticDual(*RegressionModel().profile_quadratic(theta, 3), Z, w * w, np.isfinite(w))
    for _ in range(20):
        lam = pv.lambda_star + 0.05 * rng.normal(size=2)
        assert dual.value(lam) <= pv.value + 1e-12

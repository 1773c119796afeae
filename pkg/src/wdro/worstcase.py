"""Distributionally robust risk through the one-dimensional dual in lambda.

``R_delta(P_n, theta) = inf_{lam >= 0} lam*delta + mean_i sup_D {loss(z_i + D) - lam*c(D)}``

The inner supremum comes from the model's closed-form oracle.  Closed forms
for the portfolio, variance and regression families are provided alongside
as independent checks, together with the variation norm that governs the
first-order expansion in ``sqrt(delta)``.
"""

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from ._scalar import golden_min
from .exceptions import InnerSupUnboundedForAllLambda
from .models import RegressionModel
from .norms import dual_exponent, pnorm
from .ot import CostSpec


@dataclass
class RobustRisk:
    value: float
    lambda_star: float
    delta: float

    def to_dict(self):
        return {"value": self.value, "lambdaStar": self.lambda_star, "delta": self.delta}


def _minimize_over_lambda(obj, thr):
    """Minimize a convex ``obj`` over ``lam > thr`` (``obj`` may be +inf near thr).

    Works in ``t = log(lam - thr)``; a convex function of lam is unimodal in t.
    Returns ``(lam, value)``.
    """
    f = lambda t: obj(thr + math.exp(t))
    t0 = 0.0
    f0 = f(t0)
    # walk up until the objective is finite and stops decreasing
    hi, fhi = t0, f0
    for _ in range(400):
        nxt = hi + 1.0
        fn = f(nxt)
        if math.isfinite(fhi) and fn >= fhi:
            hi = nxt
            break
        hi, fhi = nxt, fn
    else:
        if not math.isfinite(fhi):
            raise InnerSupUnboundedForAllLambda("inner supremum is infinite for every multiplier")
    lo, flo = t0, f0
    for _ in range(800):
        nxt = lo - 1.0
        fn = f(nxt)
        if not math.isfinite(fn) or fn >= flo:
            lo = nxt
            break
        lo, flo = nxt, fn
    t, val = golden_min(f, lo, hi, xtol=1e-12)
    lam = thr + math.exp(t)
    at_thr = obj(thr)
    if math.isfinite(at_thr) and at_thr <= val:
        return thr, at_thr
    return lam, val


def robust_risk_dual(model, Z, theta, delta, cost=None):
    """Worst-case risk over the transport ball of radius ``delta`` around the sample.

    Uses ``model.inner_sup`` and minimizes the dual over the multiplier.  At
    ``delta = 0`` the value is the empirical risk and ``lambda_star`` is inf.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    cost = model.default_cost() if cost is None else cost
    Z = np.asarray(Z, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if delta == 0.0:
        return RobustRisk(float(model.loss(Z, theta).mean()), math.inf, 0.0)
    thr = float(model.lambda_threshold(theta, cost))

    def obj(lam):
        s = model.inner_sup(Z, lam, theta, cost)
        if not np.isfinite(s).all():
            return math.inf
        return lam * delta + float(s.mean())

    lam, val = _minimize_over_lambda(obj, thr)
    return RobustRisk(val, lam, float(delta))


def robust_variance_dual(X, theta, delta, cost=None):
    """Worst-case variance of ``theta'X`` via ``min_m`` of a pinned-response regression dual."""
    X = np.asarray(X, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if cost is None:
        cost = CostSpec(q=2.0, r=2.0)
    cost = dataclasses.replace(cost, regression_weight=None,
                               coord_weights=tuple(cost.weights(X.shape[1])) + (math.inf,))
    model = RegressionModel()
    s = X @ theta

    def risk(m):
        Z = np.column_stack([X, np.full(X.shape[0], m)])
        return robust_risk_dual(model, Z, theta, delta, cost)

    lo, hi = float(s.min()), float(s.max())
    if hi - lo <= 0:
        best = risk(lo)
        return best
    res = minimize_scalar(lambda m: risk(m).value, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * (1.0 + abs(lo) + abs(hi))})
    return risk(float(res.x))


def wc_portfolio_return(theta, sample_mean, delta, p):
    """``-theta'mean + sqrt(delta) * ||theta||_p``."""
    theta = np.asarray(theta, dtype=float)
    return float(-theta @ np.asarray(sample_mean, dtype=float) + math.sqrt(delta) * pnorm(theta, p))


def wc_variance(theta, sample_std, delta, p):
    """``(sample_std + sqrt(delta) * ||theta||_p) ** 2``."""
    if sample_std < 0:
        raise ValueError("sample_std must be nonnegative")
    return float((sample_std + math.sqrt(delta) * pnorm(theta, p)) ** 2)


def regression_penalty_norm(theta, p, a=math.inf):
    """``(||theta||_p^p + a^(-p/2))^(1/p)``; the a-term drops for a = inf."""
    theta = np.asarray(theta, dtype=float)
    if math.isinf(a):
        return float(pnorm(theta, p))
    return float(pnorm(np.append(theta, a ** -0.5), p))


def wc_regression_risk(theta, Z, delta, p, a=math.inf):
    """``[sqrt(MSE) + sqrt(delta) * (||theta||_p^p + a^(-p/2))^(1/p)]^2`` on rows ``[X, y]``."""
    Z = np.asarray(Z, dtype=float)
    e = Z[:, -1] - Z[:, :-1] @ np.asarray(theta, dtype=float)
    rmse = math.sqrt(float(np.mean(e * e)))
    return (rmse + math.sqrt(delta) * regression_penalty_norm(theta, p, a)) ** 2


def _cost_for_p(model, p, cost):
    if cost is not None:
        return cost
    return dataclasses.replace(model.default_cost(), q=dual_exponent(p))


def variation_norm(model, Z, theta, p=2.0, cost=None):
    """``sqrt(mean_i ||D_x loss(Z_i, theta)||_*^2)``.

    The dual norm is taken over the coordinates the cost lets move; without an
    explicit ``cost`` the model's default weights are used with ``q`` conjugate
    to ``p``.
    """
    cost = _cost_for_p(model, p, cost)
    G = model.grad_x(np.asarray(Z, float), np.asarray(theta, float))
    g = cost.dual_norm(G)
    return float(math.sqrt(np.mean(g * g)))


def expansion_check(model, Z, theta, cost, deltas):
    """Residuals of ``R_delta = R_0 + sqrt(delta) V + O(delta)`` on a grid of radii.

    Returns a list of dicts with ``delta``, ``risk``, ``residual`` and
    ``ratio = residual / delta`` (0 at delta = 0).
    """
    if cost.r != 2.0:
        raise ValueError("the expansion holds for r = 2 costs")
    Z = np.asarray(Z, dtype=float)
    emp = float(model.loss(Z, theta).mean())
    V = variation_norm(model, Z, theta, cost.p, cost)
    rows = []
    for d in deltas:
        risk = robust_risk_dual(model, Z, theta, d, cost).value
        res = risk - emp - math.sqrt(d) * V
        rows.append({"delta": float(d), "risk": risk, "residual": res,
                     "ratio": res / d if d > 0 else 0.0})
    return rows

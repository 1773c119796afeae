"""
Robust risk and the square-root Lasso
=====================================

A worst-case expected loss over a Wasserstein ball around the data can be
computed through a one-dimensional dual.  For least squares with the response
held fixed, the value has a closed form, and minimizing it over the
coefficients is a square-root Lasso.  This script walks through both facts
on simulated data.
"""

# %%
# Simulated regression data with two correlated features.
import numpy as np

from wdro import RegressionModel, fit_erm_ols, fit_sqrt_lasso, robust_risk_dual, variation_norm
from wdro.worstcase import wc_regression_risk

rng = np.random.default_rng(0)
n = 200
X = rng.multivariate_normal([0, 0], [[1, 0.6], [0.6, 1]], size=n)
y = X @ [1.0, -0.5] + rng.normal(size=n)
Z = np.column_stack([X, y])

# %%
# The generic dual against the closed form, for a few radii.
model = RegressionModel()
theta = np.array([0.8, -0.4])
for delta in (0.0, 0.01, 0.1):
    dual = robust_risk_dual(model, Z, theta, delta).value
    closed = wc_regression_risk(theta, Z, delta, p=2)
    print("delta=%-5g dual=%.10f closed form=%.10f" % (delta, dual, closed))

# %%
# For small radii the robust risk grows like the empirical risk plus
# sqrt(delta) times the variation norm of the loss.
V = variation_norm(model, Z, theta)
emp = float(model.loss(Z, theta).mean())
for delta in (1e-2, 1e-4):
    r = robust_risk_dual(model, Z, theta, delta).value
    print("delta=%g  risk=%.6f  first-order=%.6f" % (delta, r, emp + np.sqrt(delta) * V))

# %%
# The robust estimator shrinks the least-squares fit toward zero as the
# radius grows.
print("OLS:", fit_erm_ols(Z).theta)
for delta in (0.001, 0.01, 0.1, 0.5):
    print("delta=%-5g  DRO:" % delta, fit_sqrt_lasso(Z, delta, p=2).theta)

"""
Choosing the radius and building a confidence region
====================================================

The radius is the upper quantile of the limit law of the scaled profile
statistic, divided by n.  The same law gives a confidence region around
the least-squares fit: an ellipsoid when the cost is Euclidean, and an
outer polyhedron from finitely many support directions.
"""

# %%
import numpy as np

from wdro import RegressionModel, build_region, estimate_radius, region_contains, sqrt_lasso_radius

rng = np.random.default_rng(1)
n, theta_star = 300, np.array([0.5, 0.5])
X = rng.normal(size=(n, 2))
Z = np.column_stack([X, X @ theta_star + rng.normal(size=n)])

# %%
# Radius from simulated draws of the limit law.  Smaller alpha means a
# larger quantile and a larger radius.
model = RegressionModel()
for alpha in (0.2, 0.1, 0.05):
    delta, q, _ = estimate_radius(model, Z, alpha, k=20000, seed=3)
    print("alpha=%.2f  eta=%.4f  delta=%.6f" % (alpha, q.eta, delta))

# %%
# The region at 90%.  Each halfspace bound dominates the ellipsoid's support
# function, so the ellipsoid sits inside the polyhedron.
hs, ell, info = build_region(model, Z, 0.1, k=500, seed=4)
sup = np.array([ell.support(u) for u in hs.directions])
print("ellipsoid inside polyhedron:", bool(np.all(sup <= hs.bounds + 1e-12)))
print("contains theta*:", region_contains(ell, theta_star))
print("shape matrix:\n", ell.shape)

# %%
# When d is large relative to n there is a closed-form prescription for the
# square-root Lasso radius.
for d in (10, 100, 1000):
    s, delta = sqrt_lasso_radius(1000, d, 0.05)
    print("n=1000 d=%-5d sqrt(delta)=%.4f" % (d, s))

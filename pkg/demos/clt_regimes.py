"""
Three regimes for the radius decay
==================================

With delta = c n^-gamma the robust estimator behaves differently depending
on gamma.  At gamma = 1 it differs from least squares by a deterministic
bias of order n^-1/2.  For gamma < 1 the shrinkage dominates and the error
decays slower than n^-1/2.  For gamma > 1 the two estimators coincide to
first order.
"""

# %%
from wdro.simlab import SimConfig, simulate_clt

cfg = SimConfig(theta_star=(0.5, 0.5), rho=0.0, n=1000, reps=400, seed=6)

r = simulate_clt(cfg, c=1.0, gamma=1.0)
print("gamma=1   mean sqrt(n)(dro-erm) =", r["levels"][0]["meanScaledGap"])
print("          minus the bias term   =", [-b for b in r["biasTerm"]])
print("          z-scores              =", r["zScores"])

# %%
r = simulate_clt(cfg, c=1.0, gamma=0.5, n_grid=[250, 1000, 4000])
print("gamma=0.5 log-log slope of the error:", round(r["slope"], 3), "(least squares would give -0.5)")

# %%
r = simulate_clt(cfg, c=1.0, gamma=2.0, n_grid=[250, 1000, 4000])
print("gamma=2   sqrt(n)||dro-erm|| by n:", [round(l["meanGapNorm"], 5) for l in r["levels"]])

"""Projection test of the probabilistic equal-opportunity criterion for a logistic classifier.

Rows are ``(x, a, y)`` with a sensitive attribute ``a`` and label ``y`` in
{0, 1}.  The cost moves only ``x``: ``||x - x'||_q^2`` plus an infinite price
for changing ``a`` or ``y``.  Because the (a, y) marginal cannot move, the
group probabilities of every distribution in the ball equal the empirical
``p11``, ``p01`` and the fairness manifold is the single linear moment
condition ``E[sig(theta'x) w(a, y)] = 0`` with
``w = 1{a=1,y=1}/p11 - 1{a=0,y=1}/p01``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from scipy.stats import chi2

from ._scalar import golden_min
from .exceptions import DegenerateSigma, EmptyGroup
from .norms import dual_exponent, pnorm

# max |sigmoid''| = 1/(6 sqrt(3))
_SIG2_MAX = 1.0 / (6.0 * math.sqrt(3.0))


@dataclass
class FairnessTestReport:
    statistic: float
    beta_hat: float
    threshold: float
    decision: str
    p11: float
    p01: float
    n: int
    alpha: float
    lambda_star: float
    sigma2: float

    def to_dict(self):
        return {"statistic": self.statistic, "betaHat": self.beta_hat,
                "threshold": self.threshold, "decision": self.decision,
                "groupCounts": {"p11": self.p11, "p01": self.p01}, "n": self.n,
                "alpha": self.alpha, "lambdaStar": self.lambda_star, "sigma2": self.sigma2}


def _sig1(s):
    e = expit(s)
    return e * (1.0 - e)


def _sig2(s):
    e = expit(s)
    return e * (1.0 - e) * (1.0 - 2.0 * e)


def group_weights(a, y):
    a = np.asarray(a)
    y = np.asarray(y)
    n = a.size
    i11 = (a == 1) & (y == 1)
    i01 = (a == 0) & (y == 1)
    if not i11.any() or not i01.any():
        raise EmptyGroup("both groups (a, y) = (1, 1) and (0, 1) need samples")
    p11, p01 = i11.sum() / n, i01.sum() / n
    return i11 / p11 - i01 / p01, p11, p01, i11, i01


def _inner_sup(kappa, s0, T, inner_grid):
    """``max_s kappa*sig(s) - (s - s0)^2 / T`` elementwise; returns (value, argmax)."""
    kappa = np.asarray(kappa, dtype=float)
    s0 = np.asarray(s0, dtype=float)
    R = T * np.abs(kappa) / 8.0  # |s - s0| <= T |kappa| max(sig') / 2
    lo, hi = s0 - R, s0 + R
    concave = np.abs(kappa) * _SIG2_MAX < 2.0 / T
    s = s0.copy()
    # safeguarded Newton on f'(s) = kappa sig'(s) - 2 (s - s0)/T where f is concave
    c = concave
    if c.any():
        k, a, b, x = kappa[c], lo[c].copy(), hi[c].copy(), s0[c].copy()
        for _ in range(100):
            g = k * _sig1(x) - 2.0 * (x - s0[c]) / T
            a = np.where(g > 0, x, a)
            b = np.where(g < 0, x, b)
            h = k * _sig2(x) - 2.0 / T
            nx = x - g / h
            bad = ~((nx > a) & (nx < b))
            nx = np.where(bad, 0.5 * (a + b), nx)
            if np.all(np.abs(nx - x) <= 1e-15 * (1.0 + np.abs(x))):
                x = nx
                break
            x = nx
        s[c] = x
    nc = ~concave
    if nc.any():
        k, a0, b0, base = kappa[nc], lo[nc], hi[nc], s0[nc]
        t = np.linspace(0.0, 1.0, inner_grid)
        grid = a0[:, None] + (b0 - a0)[:, None] * t[None, :]
        vals = k[:, None] * expit(grid) - (grid - base[:, None]) ** 2 / T
        j = np.argmax(vals, axis=1)
        step = (b0 - a0) / (inner_grid - 1)
        best = grid[np.arange(j.size), j]
        out = np.empty_like(best)
        for i in range(best.size):
            f = lambda v, i=i: -(k[i] * expit(v) - (v - base[i]) ** 2 / T)
            out[i], _ = golden_min(f, best[i] - step[i], best[i] + step[i], maxiter=60)
        s[nc] = out
    val = kappa * expit(s) - (s - s0) ** 2 / T
    # s = s0 is always feasible
    base_val = kappa * expit(s0)
    better = base_val > val
    s = np.where(better, s0, s)
    return np.maximum(val, base_val), s


def fairness_profile(X, a, y, theta, q=2.0, inner_grid=512):
    """Profile function of the equal-opportunity manifold; returns ``(value, lambda_star)``."""
    X = np.asarray(X, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if not np.any(theta):
        raise ValueError("theta must be nonzero")
    w, p11, p01, _, _ = group_weights(a, y)
    T = float(pnorm(theta, dual_exponent(q))) ** 2
    s0 = X @ theta
    act = w != 0
    n = X.shape[0]
    wa, sa = w[act], s0[act]

    def J(lam):
        v, _ = _inner_sup(lam * wa, sa, T, inner_grid)
        return -float(v.sum()) / n

    def derivs(lam):
        # envelope: J' = -mean w sig(s*); implicit differentiation of the inner
        # optimality condition gives ds*/dkappa = -sig'(s*) / f''(s*)
        kap = lam * wa
        v, sv = _inner_sup(kap, sa, T, inner_grid)
        f2 = kap * _sig2(sv) - 2.0 / T
        g = -float(np.sum(wa * expit(sv))) / n
        H = float(np.sum(wa * wa * _sig1(sv) ** 2 / f2)) / n
        return -float(v.sum()) / n, g, H

    gap = float(np.mean(w * expit(s0)))
    if gap == 0.0:
        return 0.0, 0.0
    lam = 0.0
    val, g, H = derivs(lam)
    for _ in range(100):
        step = -g / H if H < 0 else g
        t = 1.0
        while t > 1e-12:
            cand = lam + t * step
            cv = J(cand)
            if cv >= val:
                break
            t *= 0.5
        else:
            break
        moved = abs(cand - lam)
        lam = cand
        val, g, H = derivs(lam)
        if moved <= 1e-14 * (1.0 + abs(lam)):
            break
    return max(val, 0.0), lam


def fairness_beta(X, a, y, theta, q=2.0):
    """Plug-in ``beta = sigma^2 / (p01^2 p11^2 E||grad sig * w||_p^2)``; returns (beta, sigma2)."""
    X = np.asarray(X, dtype=float)
    theta = np.asarray(theta, dtype=float)
    w, p11, p01, i11, i01 = group_weights(a, y)
    s = X @ theta
    hs = expit(s)
    Zv = (hs * (p01 * i11 - p11 * i01)
          + i01 * np.mean(i11 * hs) - i11 * np.mean(i01 * hs))
    sigma2 = float(np.var(Zv))
    p = dual_exponent(q)
    den = float(np.mean((_sig1(s) * np.abs(w)) ** 2)) * float(pnorm(theta, p)) ** 2
    if den <= 0:
        raise DegenerateSigma("the sigmoid gradient vanishes on both groups")
    return sigma2 / (p01 ** 2 * p11 ** 2 * den), sigma2


def fairness_test(X, a, y, theta, alpha=0.05, q=2.0, inner_grid=512):
    """Reject equal opportunity when ``n * profile > beta_hat * chi2_1(1 - alpha)``."""
    X = np.asarray(X, dtype=float)
    a = np.asarray(a)
    y = np.asarray(y)
    n = X.shape[0]
    beta, sigma2 = fairness_beta(X, a, y, theta, q)
    if sigma2 <= 1e-12:
        raise DegenerateSigma("sample variance of Z is %.3e" % sigma2)
    value, lam = fairness_profile(X, a, y, theta, q, inner_grid)
    stat = n * value
    thr = beta * float(chi2.ppf(1.0 - alpha, 1))
    _, p11, p01, _, _ = group_weights(a, y)
    return FairnessTestReport(stat, beta, thr, "reject" if stat > thr else "retain",
                              float(p11), float(p01), n, float(alpha), lam, sigma2)


def null_sample(n, d, rng, shift=1.0):
    """H0 generator: A, Y independent fair coins, X | Y ~ N(shift*(2Y-1)*1/sqrt(d), I), X independent of A."""
    a = rng.integers(0, 2, size=n)
    y = rng.integers(0, 2, size=n)
    mu = shift * (2 * y - 1)[:, None] * np.ones(d) / math.sqrt(d)
    X = mu + rng.standard_normal((n, d))
    return X, a, y

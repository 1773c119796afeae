"""Fitting routines: least squares, the square-root Lasso and the robust mean-variance portfolio.

The square-root Lasso uses proximal gradient steps on the root-MSE term with
the norm penalty handled exactly through its proximal map, followed by a
Newton polish on the smooth piece the iterates settle on.  The portfolio fit
is a small smooth program once the norm is split or lifted to an epigraph.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from .exceptions import DegenerateResidualsWarning, Infeasible, RankDeficient
from .norms import dual_exponent, pnorm

MAX_ITER = 200_000
WINDOW = 50
RTOL = 1e-10


@dataclass
class FitResult:
    theta: np.ndarray
    objective_value: float
    iterations: int
    converged: bool
    delta: float
    stationarity: float = 0.0
    flags: dict = field(default_factory=dict)

    def to_dict(self):
        return {"theta": [float(v) for v in self.theta],
                "objectiveValue": self.objective_value,
                "iterations": self.iterations,
                "converged": self.converged,
                "delta": self.delta,
                "stationarity": self.stationarity,
                "flags": dict(self.flags)}


def _split(Z):
    Z = np.asarray(Z, dtype=float)
    return Z[:, :-1], Z[:, -1]


def _ols(X, y):
    G = X.T @ X
    ev = np.linalg.eigvalsh(G)
    if ev.min() <= 1e-10 * max(ev.max(), 1e-300):
        raise RankDeficient("X'X is singular (eigenvalues %.3e .. %.3e)" % (ev.min(), ev.max()))
    Q, R = np.linalg.qr(X)
    return np.linalg.solve(R, Q.T @ y)


def fit_erm_ols(Z):
    """Least squares on rows ``[X, y]`` through a QR factorization of X."""
    X, y = _split(Z)
    theta = _ols(X, y)
    e = y - X @ theta
    grad = -2.0 * X.T @ e / X.shape[0]
    return FitResult(theta, float(np.mean(e * e)), 1, True, 0.0,
                     stationarity=float(np.abs(grad).max()))


def prox_norm(v, kappa, p):
    """Proximal map of ``kappa * ||.||_p`` for p in {1, 2}."""
    v = np.asarray(v, dtype=float)
    if p == 1.0:
        return np.sign(v) * np.maximum(np.abs(v) - kappa, 0.0)
    if p == 2.0:
        nv = float(np.sqrt(v @ v))
        if nv <= kappa:
            return np.zeros_like(v)
        return (1.0 - kappa / nv) * v
    raise ValueError("proximal map implemented for p in {1, 2}, got %r" % p)


class _LeastSquaresStats:
    """Sufficient statistics for ``MSE(theta) = M0 + (theta-t0)' G (theta-t0)``."""

    def __init__(self, X, y):
        n = X.shape[0]
        self.G = X.T @ X / n
        self.t0 = _ols(X, y)
        e = y - X @ self.t0
        self.M0 = float(e @ e / n)
        self.yy = float(y @ y / n)

    def mse(self, theta):
        d = theta - self.t0
        return self.M0 + float(d @ self.G @ d)

    def grad_mse(self, theta):
        return 2.0 * self.G @ (theta - self.t0)


def _sqrt_lasso_parts(S, s, p):
    def F(theta):
        return math.sqrt(S.mse(theta)) + s * float(pnorm(theta, p))

    def grad_smooth(theta):
        return S.grad_mse(theta) / (2.0 * math.sqrt(S.mse(theta)))

    return F, grad_smooth


def _stationarity(g, theta, s, p):
    """Distance of ``-g`` from ``s * subdifferential of ||theta||_p``."""
    if p == 1.0:
        on = theta != 0
        viol = np.where(on, np.abs(g + s * np.sign(theta)), np.maximum(np.abs(g) - s, 0.0))
        return float(viol.max(initial=0.0))
    nt = float(np.sqrt(theta @ theta))
    if nt == 0.0:
        return max(float(np.sqrt(g @ g)) - s, 0.0)
    return float(np.sqrt(np.sum((g + s * theta / nt) ** 2)))


def _polish(S, theta, s, p, F):
    """Newton steps on the smooth piece selected by the sign/support pattern of theta."""
    for _ in range(30):
        sup = theta != 0 if p == 1.0 else np.ones(theta.size, dtype=bool)
        if not sup.any() or (p == 2.0 and not np.any(theta)):
            return theta
        m = S.mse(theta)
        rm = math.sqrt(m)
        Gv = S.G @ (theta - S.t0)
        g = Gv / rm
        H = S.G / rm - np.outer(Gv, Gv) / (rm * m)
        if p == 1.0:
            g = g + s * np.sign(theta)
        else:
            nt = float(np.sqrt(theta @ theta))
            g = g + s * theta / nt
            H = H + s * (np.eye(theta.size) / nt - np.outer(theta, theta) / nt ** 3)
        gs, Hs = g[sup], H[np.ix_(sup, sup)]
        try:
            step = np.linalg.solve(Hs, gs)
        except np.linalg.LinAlgError:
            return theta
        f0 = F(theta)
        t = 1.0
        improved = False
        while t > 1e-8:
            cand = theta.copy()
            cand[sup] -= t * step
            if p == 1.0 and np.any(np.sign(cand[sup]) != np.sign(theta[sup])):
                t *= 0.5
                continue
            if F(cand) <= f0:
                improved = F(cand) < f0
                theta = cand
                break
            t *= 0.5
        if not improved or np.abs(t * step).max() <= 1e-15 * (1.0 + np.abs(theta).max()):
            return theta
    return theta


def fit_sqrt_lasso(Z, delta, p=1.0, theta0=None):
    """Minimize ``sqrt(mean (y - X theta)^2) + sqrt(delta) * ||theta||_p`` for p in {1, 2}.

    Proximal gradient with the global step ``1/L``, where ``L`` bounds the
    curvature of the root-MSE term by ``lambda_max(G) / sqrt(min MSE)``.
    Stops when the relative objective change over 50 iterations falls below
    1e-10 (or after 200000 iterations) and finishes with a Newton polish.
    """
    p = float(p)
    if p not in (1.0, 2.0):
        raise ValueError("p must be 1 or 2")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    X, y = _split(Z)
    S = _LeastSquaresStats(X, y)
    if delta == 0.0:
        return FitResult(S.t0.copy(), math.sqrt(S.M0), 0, True, 0.0)
    s = math.sqrt(delta)
    F, grad = _sqrt_lasso_parts(S, s, p)
    if S.M0 <= 1e-14 * max(S.yy, 1e-300):
        warnings.warn("residuals vanish at the least squares fit; returning the interpolating theta",
                      DegenerateResidualsWarning, stacklevel=2)
        return FitResult(S.t0.copy(), F(S.t0), 0, False, float(delta),
                         flags={"degenerateResiduals": True})

    # theta = 0 is optimal when the dual norm of the smooth gradient there is below sqrt(delta)
    g0 = grad(np.zeros_like(S.t0))
    if pnorm(g0, dual_exponent(p)) <= s:
        return FitResult(np.zeros_like(S.t0), F(np.zeros_like(S.t0)), 0, True, float(delta),
                         stationarity=0.0)

    L = float(np.linalg.eigvalsh(S.G).max()) / math.sqrt(S.M0)
    step = 1.0 / L
    theta = S.t0.copy() if theta0 is None else np.asarray(theta0, dtype=float).copy()
    hist = [F(theta)]
    converged = False
    it = 0
    for it in range(1, MAX_ITER + 1):
        theta = prox_norm(theta - step * grad(theta), step * s, p)
        hist.append(F(theta))
        if it >= WINDOW:
            old = hist[-WINDOW - 1]
            if abs(old - hist[-1]) <= RTOL * max(abs(old), 1e-300):
                converged = True
                break
    theta = _polish(S, theta, s, p, F)
    stat = _stationarity(grad(theta), theta, s, p)
    return FitResult(theta, F(theta), it, converged, float(delta), stationarity=stat)


def max_robust_return(mu, delta, p):
    """``sup {theta'mu - sqrt(delta)||theta||_p : sum(theta) = 1}`` (may be +inf).

    By duality the value is the smallest ``s`` with ``||mu - s*1||_q <= sqrt(delta)``.
    """
    mu = np.asarray(mu, dtype=float)
    q = dual_exponent(p)
    s = math.sqrt(delta)
    g = lambda t: float(pnorm(mu - t, q))
    lo, hi = float(mu.min()), float(mu.max())
    if hi == lo:
        t0 = lo
    else:
        t0 = float(minimize_scalar(g, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-14 * (1 + abs(lo) + abs(hi))}).x)
    if g(t0) > s:
        return math.inf
    a, b = lo - (s + 1.0), t0
    while g(a) <= s:
        a = a - 2.0 * (b - a)
    for _ in range(200):
        m = 0.5 * (a + b)
        if m == a or m == b:
            break
        if g(m) <= s:
            b = m
        else:
            a = m
    return b


def _mv_problem(Sigma, mu, s, t, p, start):
    """Smooth reformulation solved by SLSQP.

    p = 1 splits theta = u - v with u, v >= 0 so that ||theta||_1 = sum(u + v)
    at the optimum; p = 2 adds an epigraph variable tau >= ||theta||_2.
    """
    d = mu.size
    scale = math.sqrt(max(float(np.trace(Sigma)) / d, 1e-300))
    if p == 1.0:
        unpack = lambda z: (z[:d] - z[d:], float(z.sum()))
        z0 = np.concatenate([np.maximum(start, 0), np.maximum(-start, 0)])
        bounds = [(0, None)] * (2 * d)
        extra = []
    else:
        unpack = lambda z: (z[:d], float(z[d]))
        z0 = np.append(start, float(np.linalg.norm(start)) * (1 + 1e-9))
        bounds = [(None, None)] * d + [(0, None)]
        extra = [{"type": "ineq",
                  "fun": lambda z: (z[d] ** 2 - z[:d] @ z[:d]),
                  "jac": lambda z: np.append(-2 * z[:d], 2 * z[d])}]

    def fun(z):
        th, nr = unpack(z)
        return (math.sqrt(max(float(th @ Sigma @ th), 1e-300)) + s * nr) / scale

    def jac(z):
        th, _ = unpack(z)
        g = Sigma @ th / math.sqrt(max(float(th @ Sigma @ th), 1e-300))
        if p == 1.0:
            return np.concatenate([g + s, -g + s]) / scale
        return np.append(g, s) / scale

    if p == 1.0:
        A_sum = np.concatenate([np.ones(d), -np.ones(d)])
        A_ret = np.concatenate([mu - s, -mu - s])
    else:
        A_sum = np.append(np.ones(d), 0.0)
        A_ret = np.append(mu, -s)
    cons = [{"type": "eq", "fun": lambda z: A_sum @ z - 1.0, "jac": lambda z: A_sum},
            {"type": "ineq", "fun": lambda z: A_ret @ z - t, "jac": lambda z: A_ret}] + extra
    res = minimize(fun, z0, jac=jac, bounds=bounds, constraints=cons, method="SLSQP",
                   options={"ftol": 1e-15, "maxiter": 1000})
    th, _ = unpack(res.x)
    return th, int(res.nit), bool(res.success)


def fit_dr_mean_variance(X, delta, target_return, p=2.0):
    """Robust mean-variance portfolio.

    Minimizes ``(sqrt(theta' Sigma theta) + sqrt(delta)||theta||_p)^2`` over
    ``sum(theta) = 1`` and ``theta'mean >= t + sqrt(delta)||theta||_p`` with the
    sample covariance (divisor n).  Feasibility is decided first in closed
    form through :func:`max_robust_return`.
    """
    p = float(p)
    if p not in (1.0, 2.0):
        raise ValueError("p must be 1 or 2")
    X = np.asarray(X, dtype=float)
    mu = X.mean(axis=0)
    d = X.shape[1]
    Sigma = np.cov(X, rowvar=False, bias=True).reshape(d, d)
    s = math.sqrt(delta)
    t = float(target_return)
    best = max_robust_return(mu, delta, p)
    if best < t - 1e-12 * (1.0 + abs(t)):
        raise Infeasible("largest robust return %.6g is below the target %.6g" % (best, t))

    start = np.linalg.lstsq(Sigma + 1e-12 * np.trace(Sigma) * np.eye(d), np.ones(d), rcond=None)[0]
    start = start / start.sum() if abs(start.sum()) > 1e-12 else np.full(d, 1.0 / d)

    def slack(th):
        return float(th @ mu) - s * float(pnorm(th, p)) - t

    theta, it, ok = _mv_problem(Sigma, mu, s, t, p, start)
    theta = theta + (1.0 - theta.sum()) / d
    obj = (math.sqrt(max(float(theta @ Sigma @ theta), 0.0)) + s * float(pnorm(theta, p))) ** 2
    res = FitResult(theta, obj, it, ok and slack(theta) >= -1e-6, float(delta))
    res.flags["constraintSlack"] = slack(theta)
    return res

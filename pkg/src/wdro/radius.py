"""Limit law of the scaled profile statistic and the radius it prescribes.

For a cost ``||x - x'||_q^2`` the scaled profile statistic converges to
``phi*(H, theta)`` with ``H ~ N(0, Cov h)``, where

    phi(xi)  = (1/4) E ||D_x h(X, theta)' xi||_p^2
    phi*(z)  = sup_xi { xi'z - phi(xi) }.

For p = 2, ``phi(xi) = xi'A xi / 4`` with ``A = E[D_x h D_x h']`` and
``phi*(z) = z'A^{-1}z``.  The radius is the (1 - alpha) quantile of
``phi*(H)`` divided by n.
"""

import dataclasses
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import ndtri

from ._parallel import RNG_NAME, normal_draws
from .exceptions import SingularCovarianceWarning, UnboundedConjugate
from .norms import dual_exponent, pnorm


@dataclass
class LimitLaw:
    """``jac`` holds the per-sample ``D_x h`` (n, k, m) already divided by the cost weights."""

    jac: np.ndarray
    sigma: np.ndarray
    p: float = 2.0
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.jac = np.asarray(self.jac, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        J = self.jac
        self.A = np.einsum("ika,ija->kj", J, J) / J.shape[0]
        self.A = 0.5 * (self.A + self.A.T)
        w, V = np.linalg.eigh(self.A)
        tol = 1e-12 * max(float(np.abs(w).max(initial=0.0)), 1e-300)
        self._kernel = V[:, w <= tol]
        keep = w > tol
        self._pinv = (V[:, keep] / w[keep]) @ V[:, keep].T
        if (~keep).any():
            self.flags["singularA"] = True
            self.flags["kernelDim"] = int((~keep).sum())

    @classmethod
    def from_matrix(cls, A, sigma=None):
        """Law with ``phi(xi) = xi'A xi / 4`` (p = 2) for a PSD matrix A."""
        A = np.asarray(A, dtype=float)
        w, V = np.linalg.eigh(0.5 * (A + A.T))
        root = V * np.sqrt(np.clip(w, 0.0, None))
        sigma = np.eye(A.shape[0]) if sigma is None else sigma
        return cls(root[None], sigma, 2.0)

    @property
    def dim(self):
        return self.A.shape[0]

    def phi(self, xi):
        xi = np.asarray(xi, dtype=float)
        if self.p == 2.0:
            return 0.25 * float(xi @ self.A @ xi)
        v = pnorm(np.einsum("ika,k->ia", self.jac, xi), self.p)
        return 0.25 * float(np.mean(v * v))

    def in_range(self, z, tol=1e-9):
        z = np.asarray(z, dtype=float)
        if self._kernel.shape[1] == 0:
            return True
        return float(np.abs(self._kernel.T @ z).max()) <= tol * (1.0 + float(np.abs(z).max()))


def limit_law(model, Z, theta, p=2.0, cost=None):
    """Plug-in limit law: Jacobians and covariance of h at ``theta`` (covariance divisor n)."""
    if cost is None:
        cost = dataclasses.replace(model.default_cost(), q=dual_exponent(p))
    Z = np.asarray(Z, dtype=float)
    J = model.jac_x_h(Z, theta)
    w = cost.weights(Z.shape[1])
    mov = np.isfinite(w)
    J = J[:, :, mov] / w[mov]
    H = model.estimating(Z, theta)
    Hc = H - H.mean(axis=0)
    sigma = Hc.T @ Hc / H.shape[0]
    return LimitLaw(J, sigma, cost.p)


def phi_hat(xi, theta, model, Z, p=2.0, cost=None):
    """``(1/4) mean_i ||D_x h(Z_i, theta)' xi||_p^2`` (movable coordinates, weight-scaled)."""
    return limit_law(model, Z, theta, p, cost).phi(xi)


def phi_star_numeric(z, law, x0=None):
    """``sup_xi xi'z - phi(xi)`` by direct numerical maximization (scipy BFGS)."""
    z = np.asarray(z, dtype=float)
    if not law.in_range(z):
        raise UnboundedConjugate("z has a component along a direction where phi vanishes")
    if not np.any(z):
        return 0.0
    x0 = np.zeros_like(z) if x0 is None else np.asarray(x0, dtype=float)
    f = lambda xi: law.phi(xi) - float(xi @ z)
    res = minimize(f, x0, method="BFGS", options={"gtol": 1e-12, "maxiter": 10000})
    # the objective is smooth for 1 < p < inf; polish with Nelder-Mead otherwise
    if law.p in (1.0, math.inf):
        res = minimize(f, res.x, method="Nelder-Mead",
                       options={"xatol": 1e-12, "fatol": 1e-15, "maxiter": 20000})
    return max(-float(res.fun), 0.0)


def phi_star(z, theta=None, law=None):
    """``phi*(z)``: ``z'A^+z`` for p = 2, numerical conjugate otherwise.

    Raises :class:`UnboundedConjugate` when ``z`` leaves the range of A; a
    singular A is recorded in ``law.flags``.
    """
    if law is None:
        raise ValueError("a LimitLaw is required")
    z = np.asarray(z, dtype=float)
    if law.p != 2.0:
        return phi_star_numeric(z, law)
    if not law.in_range(z):
        raise UnboundedConjugate("z has a component in the kernel of A")
    return float(z @ law._pinv @ z)


def phi_star_batch(Hs, law):
    """Vectorized ``phi*`` over the rows of ``Hs``; ``+inf`` for rows outside the range."""
    Hs = np.asarray(Hs, dtype=float)
    if law.p == 2.0:
        vals = np.einsum("ia,ab,ib->i", Hs, law._pinv, Hs)
        if law._kernel.shape[1]:
            off = np.abs(Hs @ law._kernel).max(axis=1) > 1e-9 * (1.0 + np.abs(Hs).max(axis=1))
            vals = np.where(off, np.inf, vals)
        return vals
    out = []
    for h in Hs:
        try:
            out.append(phi_star_numeric(h, law))
        except UnboundedConjugate:
            out.append(math.inf)
    return np.array(out)


def gaussian_sample(sigma, k, seed):
    """``k`` draws of ``N(0, sigma)``: Cholesky, else a clipped eigen square root."""
    sigma = np.asarray(sigma, dtype=float)
    N = normal_draws(seed, k, sigma.shape[0])
    try:
        L = np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(sigma)
        L = V * np.sqrt(np.clip(w, 0.0, None))
    return N @ L.T


@dataclass
class QuantileEstimate:
    eta: float
    alpha: float
    k: int
    seed: int
    index: int
    generator: str = RNG_NAME

    def to_dict(self):
        return {"eta": self.eta, "alpha": self.alpha, "k": self.k, "seed": self.seed,
                "quantileIndex": self.index, "generator": self.generator}


def default_k(alpha):
    return int(max(1000, math.ceil(50.0 / alpha)))


def upper_quantile(sample, alpha):
    """Order statistic number ``ceil(k(1 - alpha))`` (1-based) of the sample."""
    s = np.sort(np.asarray(sample, dtype=float))
    k = s.size
    idx = max(1, min(k, int(math.ceil(k * (1.0 - alpha) - 1e-12))))
    return float(s[idx - 1]), idx


def estimate_radius(model, Z, alpha, k=None, seed=0, theta=None, p=2.0, cost=None):
    """Radius ``delta = eta / n`` from the simulated limit law at the plug-in estimate.

    ``theta`` defaults to the empirical risk minimizer.  A singular sample
    covariance of h is ridged by ``1e-10 * trace / d`` and flagged.
    Returns ``(delta, QuantileEstimate, info)``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    k = default_k(alpha) if k is None else int(k)
    theta = model.fit_erm(Z) if theta is None else np.asarray(theta, dtype=float)
    law = limit_law(model, Z, theta, p, cost)
    sigma = law.sigma
    info = {"theta": theta, "flags": dict(law.flags)}
    d = sigma.shape[0]
    if np.linalg.matrix_rank(sigma) < d:
        eps = 1e-10 * float(np.trace(sigma)) / d
        sigma = sigma + eps * np.eye(d)
        info["flags"]["singularCovariance"] = True
        info["flags"]["ridge"] = eps
        warnings.warn("sample covariance of h is singular; ridged by %.3e" % eps,
                      SingularCovarianceWarning, stacklevel=2)
    H = gaussian_sample(sigma, k, seed)
    vals = phi_star_batch(H, law)
    eta, idx = upper_quantile(vals, alpha)
    return eta / n, QuantileEstimate(eta, float(alpha), k, int(seed), idx), info


def genchisq_sample(eigs, norm_theta2, sigma2, k, seed):
    """Draws of ``sum_i D_i / (1 + D_i ||theta||^2 / sigma^2) N_i^2``."""
    D = np.asarray(eigs, dtype=float)
    if (D < 0).any() or not sigma2 > 0:
        raise ValueError("need D_ii >= 0 and sigma^2 > 0")
    w = D / (1.0 + D * norm_theta2 / sigma2)
    N = normal_draws(seed, int(k), D.size)
    return (N * N) @ w


def sqrt_lasso_radius(n, d, alpha):
    """``sqrt(delta) = n^{-1/2} * pi/(pi - 2) * Phi^{-1}(1 - alpha/(2d))``; returns (sqrt_delta, delta)."""
    if not (n >= 1 and d >= 1):
        raise ValueError("n and d must be positive")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if not alpha < 0.125:
        warnings.warn("alpha outside (0, 1/8), the range the prescription is stated for",
                      RuntimeWarning, stacklevel=2)
    z = float(ndtri(1.0 - alpha / (2.0 * d)))
    s = math.pi / (math.pi - 2.0) * z / math.sqrt(n)
    return s, s * s

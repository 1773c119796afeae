"""Confidence regions built from the support function of the limit law.

With ``C = E[D_theta h]`` and the quadratic-in-xi function ``phi``, the region
around the empirical risk minimizer is

    {theta : sqrt(n) u'(theta - theta_hat) <= 2 sqrt(eta * phi(C^{-T} u)) for all u}.

Finitely many directions give an outer approximation (a polyhedron); for
``phi(xi) = xi'A xi / 4`` the exact region is the ellipsoid
``n (theta - theta_hat)' S^{-1} (theta - theta_hat) <= eta`` with
``S = C^{-1} A C^{-T}``.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import normal_draws
from .exceptions import SingularHessian
from .radius import estimate_radius, limit_law

DIRECTION_TAG = 1


@dataclass
class HalfspaceRegion:
    center: np.ndarray
    n: int
    directions: np.ndarray
    bounds: np.ndarray

    @property
    def scale(self):
        return 1.0 / math.sqrt(self.n)

    def to_dict(self):
        return {"type": "halfspace", "center": [float(v) for v in self.center],
                "scale": self.scale,
                "directions": [[float(v) for v in u] for u in self.directions],
                "bounds": [float(b) for b in self.bounds]}


@dataclass
class EllipsoidRegion:
    center: np.ndarray
    shape: np.ndarray
    level: float
    n: int

    def to_dict(self):
        return {"type": "ellipsoid", "center": [float(v) for v in self.center],
                "shapeMatrix": [[float(v) for v in row] for row in self.shape],
                "level": self.level, "n": self.n}

    def support(self, u):
        """``max {u'v : n v'S^{-1}v <= level}`` in the scaled coordinate ``v = sqrt(n)(theta - center)``."""
        u = np.asarray(u, dtype=float)
        return math.sqrt(max(self.level, 0.0) * float(u @ self.shape @ u))


def region_contains(region, theta, tol=0.0):
    """Membership of ``theta`` (``tol`` loosens each inequality additively)."""
    theta = np.asarray(theta, dtype=float)
    v = math.sqrt(region.n) * (theta - region.center)
    if isinstance(region, HalfspaceRegion):
        return bool(np.all(region.directions @ v <= region.bounds + tol))
    if isinstance(region, EllipsoidRegion):
        if region.level <= 0:
            return bool(np.all(np.abs(v) <= tol))
        q = float(v @ np.linalg.solve(region.shape, v))
        return q <= region.level + tol
    raise TypeError("unknown region type %r" % type(region).__name__)


def sphere_directions(k, d, seed):
    """``k`` directions uniform on the unit sphere from normalized Gaussian draws."""
    G = normal_draws(seed, k, d, tag=DIRECTION_TAG)
    return G / np.linalg.norm(G, axis=1, keepdims=True)


def support_bounds(law, Cinv, eta, U):
    """``2 sqrt(eta * phi(C^{-T} u))`` for each row u of U."""
    Xi = U @ Cinv  # rows are (C^{-T} u)'
    if law.p == 2.0:
        ph = 0.25 * np.einsum("ia,ab,ib->i", Xi, law.A, Xi)
    else:
        ph = np.array([law.phi(x) for x in Xi])
    return 2.0 * np.sqrt(np.maximum(eta * ph, 0.0))


def build_region(model, Z, alpha, k=2000, seed=0, draws=None, p=2.0, cost=None, theta=None,
                 eta=None):
    """Halfspace region from ``k`` random directions and, for p = 2, the exact ellipsoid.

    ``eta`` defaults to the simulated quantile of the limit law.  Returns
    ``(halfspace, ellipsoid_or_None, info)``.
    """
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    theta = model.fit_erm(Z) if theta is None else np.asarray(theta, dtype=float)
    C = model.hessian(Z, theta)
    sv = np.linalg.svd(C, compute_uv=False)
    if sv.min() <= 1e-10 * max(sv.max(), 1e-300):
        raise SingularHessian("mean of D_theta h is singular (condition %.3e)"
                              % (sv.max() / max(sv.min(), 1e-300)))
    Cinv = np.linalg.inv(C)
    law = limit_law(model, Z, theta, p, cost)
    info = {"theta": theta, "C": C}
    if eta is None:
        _, qe, rinfo = estimate_radius(model, Z, alpha, k=draws, seed=seed, theta=theta,
                                       p=p, cost=cost)
        eta = qe.eta
        info["quantile"] = qe
        info["flags"] = rinfo["flags"]
    U = sphere_directions(k, theta.size, seed)
    hs = HalfspaceRegion(theta.copy(), n, U, support_bounds(law, Cinv, eta, U))
    ell = None
    if law.p == 2.0:
        S = Cinv @ law.A @ Cinv.T
        ell = EllipsoidRegion(theta.copy(), 0.5 * (S + S.T), float(eta), n)
    info["eta"] = float(eta)
    return hs, ell, info


def example8_shape(X, y, theta):
    """``sigma^2 C^{-2} + C^{-1} Xi C^{-1} ||theta||^2`` with ``C = Xi = X'X/n`` (regression, p = 2)."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    Xi = X.T @ X / n
    e = np.asarray(y, dtype=float) - X @ theta
    s2 = float(e @ e / n)
    Ci = np.linalg.inv(Xi)
    return s2 * Ci @ Ci + Ci @ Xi @ Ci * float(theta @ theta)

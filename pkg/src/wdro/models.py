"""Loss families with the derivatives and closed-form suprema the package needs.

A model works on a data matrix ``Z`` of shape (n, m), one sample per row.  For
regression the last column is the response, so ``Z = [X, y]``.  The
estimating function is ``h = D_theta loss`` throughout; derived quantities
such as the profile function, its limit law and confidence regions are
invariant to rescaling ``h`` by a nonzero constant.
"""

import math

import numpy as np

from .exceptions import RankDeficient, UnsupportedLoss
from .ot import CostSpec


def _sup_linear_penalty(B, lam, r):
    """``sup_{w >= 0} B*w - lam*w**r`` (vectorized over lam)."""
    lam = np.asarray(lam, dtype=float)
    if B == 0.0:
        return np.zeros_like(lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        if r == 1.0:
            return np.where(lam >= B, 0.0, np.inf)
        if r == 2.0:
            return np.where(lam > 0, B * B / (4.0 * lam), np.inf)
        w = (B / (lam * r)) ** (1.0 / (r - 1.0))
        return np.where(lam > 0, (r - 1.0) * lam * w ** r, np.inf)


class EstimatingModel:
    """Base class: a loss ``loss(z, theta)`` with derivatives in z and theta.

    Subclasses provide vectorized evaluators.  ``grad_x`` is the gradient in
    the data vector, ``grad_theta`` is the estimating function h,
    ``jac_x_h`` is ``D_z h`` with shape (n, d, m) and ``jac_theta_h`` is
    ``D_theta h`` with shape (n, d, d).
    """

    name = "generic"

    def loss(self, Z, theta):
        raise NotImplementedError

    def grad_x(self, Z, theta):
        raise NotImplementedError

    def grad_theta(self, Z, theta):
        raise NotImplementedError

    def jac_x_h(self, Z, theta):
        raise NotImplementedError

    def jac_theta_h(self, Z, theta):
        raise NotImplementedError

    def estimating(self, Z, theta):
        return self.grad_theta(Z, theta)

    def default_cost(self):
        return CostSpec(q=2.0, r=2.0)

    def inner_sup(self, Z, lam, theta, cost):
        """``sup_D loss(z_i + D, theta) - lam * c(z_i, z_i + D)`` per row; +inf if unbounded."""
        raise UnsupportedLoss("%s has no closed-form inner supremum" % self.name)

    def lambda_threshold(self, theta, cost):
        """Multipliers at or below this value make the inner supremum infinite."""
        return 0.0

    def profile_quadratic(self, theta, m):
        """Coefficients of ``h_k(z) = z'Q_k z + c_k'z + d_k`` if h is quadratic in z.

        Returns ``(Q, c, d)`` with shapes (k, m, m), (k, m), (k,) or None.
        """
        return None

    def fit_erm(self, Z):
        raise NotImplementedError("%s has no empirical risk minimizer" % self.name)

    def hessian(self, Z, theta):
        """Sample mean of ``D_theta h``."""
        return self.jac_theta_h(Z, theta).mean(axis=0)


class PortfolioModel(EstimatingModel):
    """Negative portfolio return ``loss(x, theta) = -theta' x``."""

    name = "portfolio"

    def loss(self, Z, theta):
        return -np.asarray(Z, float) @ np.asarray(theta, float)

    def grad_x(self, Z, theta):
        Z = np.asarray(Z, float)
        return np.broadcast_to(-np.asarray(theta, float), Z.shape).copy()

    def grad_theta(self, Z, theta):
        return -np.asarray(Z, float)

    def jac_x_h(self, Z, theta):
        n, m = np.shape(Z)
        return np.broadcast_to(-np.eye(m), (n, m, m)).copy()

    def jac_theta_h(self, Z, theta):
        n, m = np.shape(Z)
        return np.zeros((n, m, m))

    def inner_sup(self, Z, lam, theta, cost):
        B = float(cost.dual_norm(-np.asarray(theta, float)))
        return self.loss(Z, theta) + _sup_linear_penalty(B, lam, cost.r)

    def lambda_threshold(self, theta, cost):
        if cost.r == 1.0:
            return float(cost.dual_norm(np.asarray(theta, float)))
        return 0.0

    def profile_quadratic(self, theta, m):
        return np.zeros((m, m, m)), -np.eye(m), np.zeros(m)


class MeanModel(EstimatingModel):
    """Location estimation: ``loss = |z - theta|^2 / 2`` so that ``h = theta - z``."""

    name = "mean"

    def loss(self, Z, theta):
        D = np.asarray(Z, float) - np.asarray(theta, float)
        return 0.5 * (D * D).sum(axis=1)

    def grad_x(self, Z, theta):
        return np.asarray(Z, float) - np.asarray(theta, float)

    def grad_theta(self, Z, theta):
        return np.asarray(theta, float) - np.asarray(Z, float)

    def jac_x_h(self, Z, theta):
        n, m = np.shape(Z)
        return np.broadcast_to(-np.eye(m), (n, m, m)).copy()

    def jac_theta_h(self, Z, theta):
        n, m = np.shape(Z)
        return np.broadcast_to(np.eye(m), (n, m, m)).copy()

    def profile_quadratic(self, theta, m):
        return np.zeros((m, m, m)), -np.eye(m), np.asarray(theta, float).copy()

    def fit_erm(self, Z):
        return np.asarray(Z, float).mean(axis=0)


class RegressionModel(EstimatingModel):
    """Squared loss ``(y - theta' x)^2`` on rows ``z = (x, y)``.

    The default cost pins the response (``a = inf``), i.e. only covariates
    are transported.
    """

    name = "regression"

    @staticmethod
    def _split(Z):
        Z = np.asarray(Z, float)
        return Z[:, :-1], Z[:, -1]

    def residuals(self, Z, theta):
        X, y = self._split(Z)
        return y - X @ np.asarray(theta, float)

    def loss(self, Z, theta):
        e = self.residuals(Z, theta)
        return e * e

    def grad_x(self, Z, theta):
        e = self.residuals(Z, theta)
        theta = np.asarray(theta, float)
        return np.column_stack([-2.0 * e[:, None] * theta[None, :], 2.0 * e])

    def grad_theta(self, Z, theta):
        X, _ = self._split(Z)
        e = self.residuals(Z, theta)
        return -2.0 * e[:, None] * X

    def jac_x_h(self, Z, theta):
        X, _ = self._split(Z)
        e = self.residuals(Z, theta)
        theta = np.asarray(theta, float)
        n, d = X.shape
        J = np.zeros((n, d, d + 1))
        J[:, :, :d] = -2.0 * (e[:, None, None] * np.eye(d)[None] - X[:, :, None] * theta[None, None, :])
        J[:, :, d] = -2.0 * X
        return J

    def jac_theta_h(self, Z, theta):
        X, _ = self._split(Z)
        return 2.0 * X[:, :, None] * X[:, None, :]

    def default_cost(self):
        return CostSpec(q=2.0, r=2.0, regression_weight=math.inf)

    def _slope_norm(self, theta, cost):
        beta = np.append(-np.asarray(theta, float), 1.0)
        return float(cost.dual_norm(beta))

    def lambda_threshold(self, theta, cost):
        if cost.r != 2.0:
            raise UnsupportedLoss("regression inner supremum needs r = 2")
        B = self._slope_norm(theta, cost)
        return B * B

    def inner_sup(self, Z, lam, theta, cost):
        if cost.r != 2.0:
            raise UnsupportedLoss("regression inner supremum needs r = 2")
        e2 = self.loss(Z, theta)
        B2 = self.lambda_threshold(theta, cost)
        lam = float(lam)
        if B2 == 0.0:
            return e2.copy() if lam > 0 else np.where(e2 > 0, np.inf, 0.0)
        if lam <= B2:
            return np.where(e2 > 0, np.inf, 0.0) if lam == B2 else np.full_like(e2, np.inf)
        return e2 * lam / (lam - B2)

    def profile_quadratic(self, theta, m):
        # h_k = -2 x_k (y - theta'x) = -2 x_k y + 2 x_k theta'x
        theta = np.asarray(theta, float)
        d = theta.size
        Q = np.zeros((d, m, m))
        for k in range(d):
            Q[k, k, :d] += theta
            Q[k, k, d] += -1.0
        Q = Q + Q.transpose(0, 2, 1)
        return Q, np.zeros((d, m)), np.zeros(d)

    def fit_erm(self, Z):
        X, y = self._split(Z)
        G = X.T @ X
        w = np.linalg.eigvalsh(G)
        if w.min() <= 1e-10 * max(abs(w).max(), 1e-300):
            raise RankDeficient("X'X is singular (min eigenvalue %.3e)" % w.min())
        Q, R = np.linalg.qr(X)
        return np.linalg.solve(R, Q.T @ y)


REGISTRY = {
    "portfolio": PortfolioModel,
    "mean": MeanModel,
    "regression": RegressionModel,
}


def get_model(name):
    try:
        return REGISTRY[name]()
    except KeyError:
        raise UnsupportedLoss("unknown model %r" % name) from None

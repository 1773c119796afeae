"""The profile function: smallest transport cost from the sample to ``{P : E_P h(X, theta) = 0}``.

It is computed through its dual in a multiplier ``lam`` of the same size as
h::

    value = max_lam  -(1/n) sum_i sup_x { lam'h(x, theta) - c(X_i, x) }

For estimating functions that are quadratic in the data and a weighted
squared Euclidean cost, the inner supremum is an explicit quadratic program
and the outer problem is a smooth concave maximization, solved here by
Newton's method with exact derivatives.  Affine estimating functions admit a
closed form for any ``q``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import InnerSupUnboundedEverywhere, OutsideThetaTilde, UnsupportedLoss
from .lp import linprog_max
from .norms import holder_direction, pnorm


@dataclass
class ProfileValue:
    value: float
    lambda_star: np.ndarray
    n: int

    @property
    def scaled(self):
        return self.n * self.value

    def to_dict(self):
        return {"value": self.value, "lambdaStar": [float(v) for v in self.lambda_star],
                "scaled": self.scaled, "n": self.n}


def hull_margin(H):
    """Smallest ``t`` over directions ``+-e_j`` with ``t*d`` in ``conv{rows of H}``.

    Zero lies in the interior of the convex hull exactly when the margin is
    positive.  Each direction is one small LP; returns -inf if zero is not in
    the hull at all.
    """
    H = np.asarray(H, dtype=float)
    n, k = H.shape
    margin = math.inf
    A_eq = np.zeros((k + 1, n + 1))
    A_eq[:k, :n] = H.T
    A_eq[k, :n] = 1.0
    b_eq = np.zeros(k + 1)
    b_eq[k] = 1.0
    c = np.zeros(n + 1)
    c[n] = 1.0
    for j in range(k):
        for sgn in (1.0, -1.0):
            A_eq[:k, n] = 0.0
            A_eq[j, n] = -sgn
            try:
                res = linprog_max(c, A_eq=A_eq, b_eq=b_eq)
            except Exception:
                return -math.inf
            margin = min(margin, res.value)
    return margin


def in_theta_tilde(model, Z, theta, tol=1e-10):
    H = model.estimating(Z, theta)
    scale = max(float(np.abs(H).max()), 1e-300)
    return hull_margin(H) > tol * scale


class _QuadraticDual:
    """``J(lam) = -(1/n) sum_i [lam'h_i + g_i' A^{-1} g_i]`` with its exact derivatives."""

    def __init__(self, Q, c, d, Z, w2, mov):
        self.Q, self.c, self.d = Q, c, d
        self.Z = Z
        self.mov = mov
        self.W = np.diag(w2[mov])
        self.QZ = np.einsum("kab,ib->ika", Q, Z)[:, :, mov]  # (n, k, |M|)
        self.QMM = Q[:, mov][:, :, mov]
        self.cM = c[:, mov]
        self.h = np.einsum("ia,kab,ib->ik", Z, Q, Z) + Z @ c.T + d  # (n, k)

    def _solve(self, lam):
        A = self.W - np.einsum("k,kab->ab", lam, self.QMM)
        try:
            Lc = np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            return None
        G = np.einsum("k,ika->ia", lam, self.QZ) + 0.5 * (lam @ self.cM)  # (n, |M|)
        Dl = np.linalg.solve(Lc.T, np.linalg.solve(Lc, G.T)).T  # A^{-1} g_i
        return A, Lc, G, Dl

    def value(self, lam):
        s = self._solve(lam)
        if s is None:
            return -math.inf
        _, _, G, Dl = s
        return -float(np.mean(self.h @ lam + np.einsum("ia,ia->i", G, Dl)))

    def derivatives(self, lam):
        """Value, gradient and Hessian at ``lam`` (None if outside the domain)."""
        s = self._solve(lam)
        if s is None:
            return None
        A, Lc, G, Dl = s
        val = -float(np.mean(self.h @ lam + np.einsum("ia,ia->i", G, Dl)))
        # b_ij = half the z-gradient of h_j at the perturbed point, movable block
        B = self.QZ + np.einsum("kab,ib->ika", self.QMM, Dl) + 0.5 * self.cM[None]
        # h at the perturbed point: h_i + grad h_i . D + D.Q D
        hq = self.h + 2.0 * np.einsum("ika,ia->ik", self.QZ + 0.5 * self.cM[None], Dl) \
            + np.einsum("ia,kab,ib->ik", Dl, self.QMM, Dl)
        grad = -hq.mean(axis=0)
        AiB = np.linalg.solve(Lc.T, np.linalg.solve(Lc, B.reshape(-1, B.shape[2]).T))
        AiB = AiB.T.reshape(B.shape)
        hess = -2.0 * np.einsum("ika,ija->kj", B, AiB) / B.shape[0]
        return val, grad, hess


def _newton_ascent(dual, lam0, max_iter=200):
    lam = np.array(lam0, dtype=float)
    out = dual.derivatives(lam)
    if out is None:
        return lam, -math.inf, 0
    val, grad, hess = out
    it = 0
    for it in range(1, max_iter + 1):
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = grad.copy()
        dec = float(grad @ step)
        if not dec > 0:
            step = grad.copy()
            dec = float(grad @ grad)
        t = 1.0
        while t > 1e-20:
            cand = lam + t * step
            cv = dual.value(cand)
            if cv >= val + 1e-4 * t * dec or (cv >= val and t * np.abs(step).max() < 1e-12 * (1 + np.abs(lam).max())):
                break
            t *= 0.5
        else:
            break
        moved = np.abs(cand - lam).max()
        lam = cand
        val, grad, hess = dual.derivatives(lam)
        if moved <= 1e-15 * (1.0 + np.abs(lam).max()) or dec <= 1e-30 * (1.0 + abs(val)):
            break
    return lam, val, it


def _affine_profile(C, d, Z, cost, mov, w):
    """Closed form for ``h = C z + d``: the cheapest plan is a common shift of the mean."""
    hbar = Z.mean(axis=0) @ C.T + d
    CM = C[:, mov]
    if CM.shape[0] != CM.shape[1]:
        raise UnsupportedLoss("affine estimating function must act on the movable coordinates bijectively")
    shift = -np.linalg.solve(CM, hbar)
    v = w[mov] * shift
    val = float(pnorm(v, cost.q)) ** 2
    mu = 2.0 * holder_direction(v, cost.q)  # maximizer in mu = C_M' lam / w
    lam = np.linalg.solve(CM.T, w[mov] * mu)
    return val, lam


def profile_value(model, Z, theta, cost=None, check_interior=True, multistart=False):
    """Profile function at ``theta``; see the module docstring for the dual used.

    Raises :class:`OutsideThetaTilde` when zero is not interior to the convex
    hull of ``{h(Z_i, theta)}``.
    """
    cost = model.default_cost() if cost is None else cost
    Z = np.asarray(Z, dtype=float)
    theta = np.asarray(theta, dtype=float)
    n, m = Z.shape
    if cost.r != 2.0:
        raise UnsupportedLoss("the profile function is implemented for r = 2 costs")
    if check_interior and not in_theta_tilde(model, Z, theta):
        raise OutsideThetaTilde("zero is not interior to the convex hull of the estimating function values")
    parts = model.profile_quadratic(theta, m)
    if parts is None:
        raise UnsupportedLoss("model %s has no quadratic estimating function" % model.name)
    Q, c, d = parts
    w = cost.weights(m)
    mov = np.isfinite(w)
    if not mov.any() or (w[mov] <= 0).any():
        raise InnerSupUnboundedEverywhere("a movable coordinate has zero transport weight")
    affine = not np.any(Q)
    if affine and cost.q != 2.0:
        val, lam = _affine_profile(c, d, Z, cost, mov, w)
        return ProfileValue(max(val, 0.0), lam, n)
    if cost.q != 2.0:
        raise UnsupportedLoss("quadratic estimating functions need q = 2")
    dual = _QuadraticDual(Q, c, d, Z, w * w, mov)
    k = Q.shape[0]
    lam, val, _ = _newton_ascent(dual, np.zeros(k))
    if multistart:
        hn = float(np.linalg.norm(dual.h.sum(axis=0))) / math.sqrt(n)
        best = (-val, 0, lam)
        idx = 1
        for j in range(k):
            for sgn in (1.0, -1.0):
                start = np.zeros(k)
                start[j] = sgn * max(hn, 1e-3) * 1e-2
                if dual.value(start) == -math.inf:
                    start *= 1e-3
                l2, v2, _ = _newton_ascent(dual, start)
                best = min(best, (-v2, idx, l2), key=lambda t: (t[0], t[1]))
                idx += 1
        val, lam = -best[0], best[2]
    return ProfileValue(max(val, 0.0), lam, n)


def scaled_profile_stat(model, Z, theta, cost=None):
    """``n`` times the profile function."""
    return profile_value(model, Z, theta, cost).scaled

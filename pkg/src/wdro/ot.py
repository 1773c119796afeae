"""Discrete optimal transport and worst-case expectations over transport balls.

Everything here works on finitely supported distributions and is exact up to
linear-programming round-off: the transport cost and the worst-case
expectation are solved as LPs, and the worst-case expectation is also
available through its one-dimensional dual in the multiplier ``lambda``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._scalar import bracket_upper, golden_min
from .exceptions import InfeasibleCost, InfeasibleLP, UnboundedDual
from .lp import linprog_max
from .norms import dual_exponent, pnorm


@dataclass(frozen=True)
class CostSpec:
    """Transport cost ``c(x, x') = ||w * (x - x')||_q ** r``.

    ``coord_weights`` scales each coordinate; an infinite weight pins the
    coordinate (moving it costs +inf).  ``regression_weight`` ``a`` treats the
    last coordinate as a response and sets its weight to ``sqrt(a)``, so that
    for q = r = 2 the cost reads ``||dx||_2**2 + a * dy**2``.
    """

    q: float = 2.0
    r: float = 2.0
    coord_weights: tuple = None
    regression_weight: float = None

    def __post_init__(self):
        if not self.q >= 1:
            raise ValueError("q must be >= 1")
        if not (1 <= self.r < math.inf):
            raise ValueError("r must lie in [1, inf)")
        if self.coord_weights is not None:
            w = np.asarray(self.coord_weights, dtype=float)
            if (w < 0).any() or np.isnan(w).any():
                raise ValueError("coordinate weights must be nonnegative")
            object.__setattr__(self, "coord_weights", tuple(float(v) for v in w))
        if self.regression_weight is not None and not self.regression_weight > 0:
            raise ValueError("regression weight a must be positive")

    @property
    def p(self):
        return dual_exponent(self.q)

    def weights(self, m):
        if self.coord_weights is None:
            w = np.ones(m)
        else:
            w = np.array(self.coord_weights, dtype=float)
            if w.size != m:
                raise ValueError("expected %d coordinate weights, got %d" % (m, w.size))
        if self.regression_weight is not None:
            w[-1] = math.sqrt(self.regression_weight)
        return w

    def movable(self, m):
        return np.isfinite(self.weights(m))

    def pairwise(self, X, Z):
        """Cost matrix between rows of X (k x m) and rows of Z (K x m); +inf allowed."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        w = self.weights(X.shape[1])
        D = X[:, None, :] - Z[None, :, :]
        fixed = ~np.isfinite(w)
        wf = np.where(fixed, 0.0, w)
        C = pnorm(D * wf, self.q) ** self.r
        if fixed.any():
            clash = (D[:, :, fixed] != 0).any(axis=-1)
            C = np.where(clash, np.inf, C)
        return C

    def __call__(self, x, z):
        return float(self.pairwise(x, z)[0, 0])

    def dual_norm(self, g):
        """Dual norm of gradients ``g`` (last axis): ``||g / w||_p`` over movable coords."""
        g = np.asarray(g, dtype=float)
        w = self.weights(g.shape[-1])
        mov = np.isfinite(w)
        gm = g[..., mov]
        wm = w[mov]
        with np.errstate(divide="ignore", invalid="ignore"):
            scaled = np.where(wm > 0, gm / np.where(wm > 0, wm, 1.0),
                              np.where(gm == 0, 0.0, np.inf))
        return pnorm(scaled, self.p)

    def to_dict(self):
        return {"q": self.q, "r": self.r,
                "coordWeights": None if self.coord_weights is None else list(self.coord_weights),
                "regressionWeight": self.regression_weight}


@dataclass
class DiscreteDistribution:
    """Finitely supported distribution: ``atoms`` (k x m) with probability ``weights``."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        self.atoms = atoms[:, None] if atoms.ndim == 1 else atoms
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if self.weights.size != self.atoms.shape[0]:
            raise ValueError("weight count %d != atom count %d"
                             % (self.weights.size, self.atoms.shape[0]))
        if (self.weights < 0).any():
            raise ValueError("weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights sum to %.15g, not 1" % self.weights.sum())

    @classmethod
    def empirical(cls, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        n = X.shape[0]
        return cls(X, np.full(n, 1.0 / n))

    @property
    def size(self):
        return self.weights.size

    def expect(self, values):
        return float(self.weights @ np.asarray(values, dtype=float))


@dataclass
class Coupling:
    """Joint law on two finite supports with its marginals."""

    matrix: np.ndarray
    row_marginal: np.ndarray = field(default=None)
    col_marginal: np.ndarray = field(default=None)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=float)
        if self.row_marginal is None:
            self.row_marginal = self.matrix.sum(axis=1)
        if self.col_marginal is None:
            self.col_marginal = self.matrix.sum(axis=0)
        self.row_marginal = np.asarray(self.row_marginal, dtype=float)
        self.col_marginal = np.asarray(self.col_marginal, dtype=float)

    def check(self, tol=1e-9):
        return (bool((self.matrix >= -tol).all())
                and np.allclose(self.matrix.sum(axis=1), self.row_marginal, atol=tol, rtol=0)
                and np.allclose(self.matrix.sum(axis=0), self.col_marginal, atol=tol, rtol=0))

    def expected_cost(self, C):
        C = np.asarray(C, dtype=float)
        mask = self.matrix > 0
        return float((self.matrix[mask] * C[mask]).sum())


def transport_cost(P, Q, cost):
    """Optimal transport cost between two discrete distributions.

    Returns ``(value, coupling)``.  Pairs with infinite cost are left out of
    the LP instead of being given large finite costs.
    """
    C = cost.pairwise(P.atoms, Q.atoms)
    k, K = C.shape
    idx = np.argwhere(np.isfinite(C))
    if idx.size == 0:
        raise InfeasibleCost("every pair of atoms has infinite cost")
    nv = idx.shape[0]
    A_eq = np.zeros((k + K, nv))
    A_eq[idx[:, 0], np.arange(nv)] = 1.0
    A_eq[k + idx[:, 1], np.arange(nv)] = 1.0
    b_eq = np.concatenate([P.weights, Q.weights])
    try:
        res = linprog_max(-C[idx[:, 0], idx[:, 1]], A_eq=A_eq, b_eq=b_eq)
    except InfeasibleLP:
        raise InfeasibleCost("no coupling with finite cost exists") from None
    pi = np.zeros((k, K))
    pi[idx[:, 0], idx[:, 1]] = res.x
    return max(-res.value, 0.0), Coupling(pi, P.weights.copy(), Q.weights.copy())


def _support(pref, candidates):
    if candidates is None:
        return pref.atoms
    cand = np.atleast_2d(np.asarray(candidates, dtype=float))
    if cand.shape[1] != pref.atoms.shape[1] and cand.shape[0] == pref.atoms.shape[1]:
        cand = cand.T
    return np.vstack([pref.atoms, cand])


def _values(f, support):
    if callable(f):
        return np.asarray(f(support), dtype=float).ravel()
    vals = np.asarray(f, dtype=float).ravel()
    if vals.size != support.shape[0]:
        raise ValueError("f has %d values but the support has %d points"
                         % (vals.size, support.shape[0]))
    return vals


def worstcase_expectation_primal(f, pref, delta, cost, candidates=None):
    """Worst-case ``E_P[f]`` over ``D_c(pref, P) <= delta`` as a finite LP.

    The candidate support is the union of ``pref.atoms`` and ``candidates``;
    ``f`` is a callable on points or an array of its values on that support.
    Returns ``(value, coupling)`` where the coupling is k x K.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    support = _support(pref, candidates)
    fv = _values(f, support)
    C = cost.pairwise(pref.atoms, support)
    k, K = C.shape
    idx = np.argwhere(np.isfinite(C))
    nv = idx.shape[0]
    A_eq = np.zeros((k, nv))
    A_eq[idx[:, 0], np.arange(nv)] = 1.0
    cvals = C[idx[:, 0], idx[:, 1]]
    res = linprog_max(fv[idx[:, 1]], A_ub=cvals[None, :], b_ub=[delta],
                      A_eq=A_eq, b_eq=pref.weights)
    pi = np.zeros((k, K))
    pi[idx[:, 0], idx[:, 1]] = res.x
    return res.value, Coupling(pi, pref.weights.copy())


def dual_objective(lam, fv, C, p, delta):
    """``lam * delta + sum_i p_i max_j (f_j - lam * c_ij)`` with inf costs skipped."""
    with np.errstate(invalid="ignore"):
        M = np.where(np.isfinite(C), fv[None, :] - lam * C, -np.inf)
    return lam * delta + float(p @ M.max(axis=1))


def _breakpoint_refine(lam0, fv, C, p, delta):
    # The dual objective is piecewise linear; polish the golden-section
    # answer by evaluating breakpoints among lines active near lam0.
    finite = np.isfinite(C)
    vals = np.where(finite, fv[None, :] - lam0 * np.where(finite, C, 0.0), -np.inf)
    top = vals.max(axis=1)
    scale = 1.0 + np.abs(fv).max() + lam0 * np.where(finite, C, 0.0).max()
    cands = [lam0, 0.0]
    for i in range(C.shape[0]):
        act = np.nonzero(vals[i] >= top[i] - 1e-7 * scale)[0]
        for a in act:
            for b in act:
                dc = C[i, a] - C[i, b]
                if dc > 0:
                    lam = (fv[a] - fv[b]) / dc
                    if lam >= 0:
                        cands.append(lam)
    cands = np.unique(cands)
    objs = np.array([dual_objective(l, fv, C, p, delta) for l in cands])
    j = int(np.argmin(objs))
    return float(cands[j]), float(objs[j])


def worstcase_expectation_dual(f, pref, delta, cost, candidates=None):
    """Worst-case expectation through ``inf_{lam>=0} lam*delta + E_pref[f_lam]``.

    ``f_lam(x) = max_z f(z) - lam*c(x, z)`` is evaluated by enumeration over
    the candidate support.  The outer minimization brackets by doubling and
    runs golden-section search, then snaps to the exact breakpoint.
    Returns ``(value, lambda_star)``.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    support = _support(pref, candidates)
    fv = _values(f, support)
    C = cost.pairwise(pref.atoms, support)
    if not np.allclose(np.diag(C[:, :pref.size]), 0.0):
        raise ValueError("cost must vanish on the diagonal")
    p = pref.weights
    if not np.isfinite(fv).all():
        raise UnboundedDual("f must be finite on the candidate support")

    if delta == 0.0:
        # Beyond the largest (f_j - f_i)/c_ij the objective is flat at E[f].
        fi = fv[:pref.size]
        with np.errstate(divide="ignore", invalid="ignore"):
            slopes = np.where(np.isfinite(C) & (C > 0), (fv[None, :] - fi[:, None]) / C, 0.0)
        lam = max(0.0, float(slopes.max()))
        return float(p @ fi), lam

    obj = lambda lam: dual_objective(lam, fv, C, p, delta)
    hi = bracket_upper(obj, 0.0, start=1.0)
    lam, _ = golden_min(obj, 0.0, hi)
    lam, val = _breakpoint_refine(lam, fv, C, p, delta)
    v0 = obj(0.0)
    if v0 <= val + 1e-12 * (1.0 + abs(val)):
        lam, val = 0.0, min(v0, val)
    return val, lam


def worstcase_dual_lp(f, pref, delta, cost, candidates=None):
    """The explicit dual LP ``min lam*delta + sum_i p_i nu_i`` s.t. ``nu_i >= f_j - lam c_ij``.

    Kept as an independent check on :func:`worstcase_expectation_dual`.
    Returns ``(value, lambda_star)``.
    """
    support = _support(pref, candidates)
    fv = _values(f, support)
    C = cost.pairwise(pref.atoms, support)
    k = C.shape[0]
    idx = np.argwhere(np.isfinite(C))
    # variables: lam, nu_plus (k), nu_minus (k); maximize the negated objective
    nv = 1 + 2 * k
    c = np.concatenate([[-delta], -pref.weights, pref.weights])
    A = np.zeros((idx.shape[0], nv))
    A[:, 0] = -C[idx[:, 0], idx[:, 1]]
    A[np.arange(idx.shape[0]), 1 + idx[:, 0]] = -1.0
    A[np.arange(idx.shape[0]), 1 + k + idx[:, 0]] = 1.0
    b = -fv[idx[:, 1]]
    res = linprog_max(c, A_ub=A, b_ub=b)
    return -res.value, float(res.x[0])

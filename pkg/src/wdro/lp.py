"""Dense two-phase simplex for the small linear programs used in the package.

Problems have the form::

    maximize    c @ x
    subject to  A_ub @ x <= b_ub
                A_eq @ x == b_eq
                x >= 0

Sizes are tiny (tens to a few hundred columns, a handful of rows), so a full
tableau with Dantzig pricing and a Bland fallback is both adequate and exact
enough for the 1e-9 level agreements checked elsewhere.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InfeasibleLP, UnboundedLP

_PIV_TOL = 1e-12
_COST_TOL = 1e-11
_FEAS_TOL = 1e-9


@dataclass
class LPResult:
    x: np.ndarray
    value: float
    duals_ub: np.ndarray
    duals_eq: np.ndarray
    iterations: int


def _pivot(T, r, s):
    T[r] /= T[r, s]
    col = T[:, s].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _run(T, basis, ncols, max_iter):
    """Maximize the objective stored (negated) in the last row of T."""
    it = 0
    degenerate = 0
    m = T.shape[0] - 1
    while True:
        red = T[-1, :ncols]
        if degenerate > 50:
            cand = np.nonzero(red < -_COST_TOL)[0]
            if cand.size == 0:
                return it
            s = int(cand[0])
        else:
            s = int(np.argmin(red))
            if red[s] >= -_COST_TOL:
                return it
        col = T[:m, s]
        pos = col > _PIV_TOL
        if not pos.any():
            raise UnboundedLP("objective unbounded along column %d" % s)
        ratios = np.full(m, np.inf)
        ratios[pos] = T[:m, -1][pos] / col[pos]
        rmin = ratios.min()
        ties = np.nonzero(ratios <= rmin + 1e-14 * (1.0 + abs(rmin)))[0]
        # Bland: among ties leave the lowest basis index
        r = int(ties[np.argmin(basis[ties])])
        degenerate = degenerate + 1 if rmin <= 1e-14 else 0
        _pivot(T, r, s)
        basis[r] = s
        it += 1
        if it > max_iter:
            raise RuntimeError("simplex iteration limit reached")


def linprog_max(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_iter=50000):
    """Solve a small LP in maximization form; see the module docstring.

    Returns an :class:`LPResult` whose ``duals_ub`` (nonnegative) and
    ``duals_eq`` satisfy ``A_ub.T @ y_ub + A_eq.T @ y_eq >= c`` at optimality.
    Raises :class:`InfeasibleLP` or :class:`UnboundedLP`.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, float).ravel()
    mu, me = A_ub.shape[0], A_eq.shape[0]
    m = mu + me

    # columns: x (n) | slacks (mu) | artificials (m) | rhs
    A = np.zeros((m, n + mu))
    A[:mu, :n] = A_ub
    A[:mu, n:] = np.eye(mu)
    A[mu:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    sign = np.where(b < 0, -1.0, 1.0)
    A *= sign[:, None]
    b = b * sign

    nat = n + mu
    T = np.zeros((m + 1, nat + m + 1))
    T[:m, :nat] = A
    T[:m, nat:nat + m] = np.eye(m)
    T[:m, -1] = b
    basis = np.arange(nat, nat + m)
    # slack rows with b >= 0 can start with the slack basic
    for i in range(mu):
        if sign[i] > 0:
            basis[i] = n + i
    for i in range(m):
        if basis[i] != nat + i:
            T[i, nat + i] = 0.0
    art_rows = np.array([i for i in range(m) if basis[i] >= nat], dtype=int)

    it = 0
    if art_rows.size:
        # phase 1: maximize -(sum of artificials)
        T[-1, :] = 0.0
        T[-1, nat + art_rows] = 1.0
        for i in art_rows:
            T[-1] -= T[i]
        it += _run(T, basis, nat + m, max_iter)
        if T[-1, -1] < -_FEAS_TOL * max(1.0, np.abs(b).max(initial=0.0)):
            raise InfeasibleLP("phase one optimum %.3e > 0" % -T[-1, -1])
        # drive remaining artificials out of the basis
        for r in range(m):
            if basis[r] >= nat:
                row = T[r, :nat]
                cand = np.nonzero(np.abs(row) > 1e-9)[0]
                if cand.size:
                    _pivot(T, r, int(cand[0]))
                    basis[r] = int(cand[0])
        keep = basis < nat
        redundant = ~keep
    else:
        redundant = np.zeros(m, dtype=bool)

    # phase 2 on the natural columns only
    rows = np.nonzero(~redundant)[0]
    T2 = np.zeros((rows.size + 1, nat + 1))
    T2[:-1, :nat] = T[rows, :nat]
    T2[:-1, -1] = T[rows, -1]
    basis2 = basis[rows].copy()
    cfull = np.concatenate([c, np.zeros(mu)])
    T2[-1, :nat] = -cfull
    for i, j in enumerate(basis2):
        T2[-1] += cfull[j] * T2[i]
    it += _run(T2, basis2, nat, max_iter)

    z = np.zeros(nat)
    z[basis2] = T2[:-1, -1]
    x = np.clip(z[:n], 0.0, None)

    # duals from the basis: B^T y = c_B on the sign-normalized rows
    B = A[np.ix_(rows, basis2)]
    y = np.zeros(m)
    if rows.size:
        y_rows = np.linalg.lstsq(B.T, cfull[basis2], rcond=None)[0]
        y[rows] = y_rows
    y *= sign
    return LPResult(x=x, value=float(c @ x), duals_ub=y[:mu], duals_eq=y[mu:],
                    iterations=it)

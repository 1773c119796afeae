"""Monte Carlo experiments on the Gaussian linear regression model.

``Y = theta*' X + eps`` with ``X ~ N(0, Xi)``, ``Xi = [[1, rho], [rho, 1]]``
(or the identity in higher dimension), ``eps ~ N(0, sigma^2)``.  Every
replication draws from its own PCG64 stream keyed by (seed, tag, replication),
so summaries are identical for any thread count.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import pmap, stream
from .estimators import fit_erm_ols, fit_sqrt_lasso
from .exceptions import ZeroVariation
from .inference import build_region, region_contains
from .lp import linprog_max
from .models import RegressionModel
from .norms import pnorm
from .ot import CostSpec, DiscreteDistribution, worstcase_expectation_primal
from .radius import estimate_radius

TAG_DATA = 2
TAG_SEED = 3


@dataclass
class SimConfig:
    theta_star: tuple = (0.5, 0.5)
    rho: float = 0.0
    sigma2: float = 1.0
    n: int = 100
    reps: int = 1000
    radius_rule: dict = field(default_factory=lambda: {"type": "algorithm1", "alpha": 0.05, "k": 1000})
    seed: int = 0
    p: float = 2.0

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("replications must be >= 1")
        if not abs(self.rho) < 1:
            raise ValueError("|rho| must be < 1")
        rule = self.radius_rule
        if rule.get("type") == "power" and not rule.get("gamma", 0) > 0:
            raise ValueError("power rule needs gamma > 0")
        if self.seed is None:
            raise ValueError("a seed is required")

    @property
    def dim(self):
        return len(self.theta_star)

    def xi(self):
        d = self.dim
        X = np.eye(d)
        if d >= 2:
            X[0, 1] = X[1, 0] = self.rho
        return X

    def to_dict(self):
        return {"modelSpec": {"thetaStar": [float(v) for v in self.theta_star], "rho": self.rho,
                              "sigma2": self.sigma2, "d": self.dim, "p": self.p},
                "n": self.n, "reps": self.reps, "radiusRule": dict(self.radius_rule),
                "seed": self.seed}

    @classmethod
    def from_dict(cls, d):
        """Build from the JSON schema ``{modelSpec, n, reps, radiusRule, seed}``."""
        if "seed" not in d:
            raise ValueError("config needs a seed")
        ms = d.get("modelSpec", {})
        th = ms.get("thetaStar", (0.5, 0.5))
        if "d" in ms and int(ms["d"]) != len(th):
            raise ValueError("modelSpec.d disagrees with len(thetaStar)")
        rule = d.get("radiusRule", {"type": "algorithm1", "alpha": 0.05, "k": 1000})
        return cls(theta_star=tuple(float(v) for v in th), rho=float(ms.get("rho", 0.0)),
                   sigma2=float(ms.get("sigma2", 1.0)), n=int(d.get("n", 100)),
                   reps=int(d.get("reps", 1000)), radius_rule=dict(rule),
                   seed=int(d["seed"]), p=float(ms.get("p", 2.0)))


def sample_regression(cfg, n, rep, tag=TAG_DATA):
    """Replication ``rep`` of the regression population: rows ``[X, y]``."""
    g = stream(cfg.seed, tag, n, rep)
    d = cfg.dim
    L = np.linalg.cholesky(cfg.xi())
    X = g.standard_normal((n, d)) @ L.T
    y = X @ np.asarray(cfg.theta_star, float) + math.sqrt(cfg.sigma2) * g.standard_normal(n)
    return np.column_stack([X, y])


def _rep_seed(cfg, n, rep):
    return int(stream(cfg.seed, TAG_SEED, n, rep).integers(2 ** 62))


def resolve_delta(cfg, Z, n, rep):
    rule = cfg.radius_rule
    kind = rule.get("type")
    if kind == "fixed":
        return float(rule["delta"])
    if kind == "power":
        return float(rule["c"]) * n ** (-float(rule["gamma"]))
    if kind == "algorithm1":
        delta, _, _ = estimate_radius(RegressionModel(), Z, float(rule["alpha"]),
                                      k=rule.get("k"), seed=_rep_seed(cfg, n, rep), p=cfg.p)
        return delta
    raise ValueError("unknown radius rule %r" % kind)


def _fit_pair(cfg, n, rep):
    Z = sample_regression(cfg, n, rep)
    erm = fit_erm_ols(Z).theta
    delta = resolve_delta(cfg, Z, n, rep)
    dro = fit_sqrt_lasso(Z, delta, cfg.p).theta
    return erm, dro, delta


def simulate_scatter(cfg):
    """Per-replication ERM and DRO fits with spread and shrinkage summaries."""
    out = pmap(lambda r: _fit_pair(cfg, cfg.n, r), range(cfg.reps))
    erm = np.array([o[0] for o in out])
    dro = np.array([o[1] for o in out])
    deltas = np.array([o[2] for o in out])
    ve, vd = erm.var(axis=0, ddof=1), dro.var(axis=0, ddof=1)
    summary = {
        "config": cfg.to_dict(),
        "varianceErm": ve.tolist(), "varianceDro": vd.tolist(),
        "varianceRatio": (vd / ve).tolist(),
        "meanNormErm": float(np.linalg.norm(erm, axis=1).mean()),
        "meanNormDro": float(np.linalg.norm(dro, axis=1).mean()),
        "meanDelta": float(deltas.mean()),
    }
    rows = [{"rep": i, "delta": float(deltas[i]),
             **{"erm%d" % j: float(erm[i, j]) for j in range(cfg.dim)},
             **{"dro%d" % j: float(dro[i, j]) for j in range(cfg.dim)}} for i in range(cfg.reps)]
    return summary, rows


def _norm_grad(theta, p):
    theta = np.asarray(theta, dtype=float)
    nrm = float(pnorm(theta, p))
    if math.isinf(p):
        g = np.zeros_like(theta)
        j = int(np.argmax(np.abs(theta)))
        g[j] = np.sign(theta[j])
        return g
    return np.sign(theta) * (np.abs(theta) / nrm) ** (p - 1.0)


def population_bias(cfg, c):
    """``b_c = sqrt(c) C^{-1} D_theta V`` at the population, with ``C = 2 Xi``.

    ``V(theta) = 2 ||theta||_p sqrt(MSE(theta))`` and ``MSE`` is stationary at
    theta*, so ``D_theta V = 2 sigma D||theta*||_p``.
    """
    th = np.asarray(cfg.theta_star, dtype=float)
    dV = 2.0 * math.sqrt(cfg.sigma2) * _norm_grad(th, cfg.p)
    return math.sqrt(c) * np.linalg.solve(2.0 * cfg.xi(), dV)


@dataclass
class BiasTerm:
    b: np.ndarray
    c: float
    Cinv: np.ndarray
    dV: np.ndarray

    def to_dict(self):
        return {"b": self.b.tolist(), "c": self.c, "Cinv": self.Cinv.tolist(), "dV": self.dV.tolist()}


def bias_term(model, Z, theta, c, p=2.0, cost=None):
    """``sqrt(c) C^{-1} D_theta V`` from data, with ``D_theta V`` by central differences."""
    from .worstcase import variation_norm

    theta = np.asarray(theta, dtype=float)
    V = lambda t: variation_norm(model, Z, t, p, cost)
    if V(theta) <= 1e-12:
        raise ZeroVariation("variation norm vanishes at theta")
    h = 1e-5 * (1.0 + float(np.linalg.norm(theta)))
    dV = np.array([(V(theta + h * e) - V(theta - h * e)) / (2 * h) for e in np.eye(theta.size)])
    Cinv = np.linalg.inv(model.hessian(Z, theta))
    return BiasTerm(math.sqrt(c) * Cinv @ dV, float(c), Cinv, dV)


def simulate_clt(cfg, c=1.0, gamma=1.0, n_grid=None):
    """Regime report for ``delta = c n^-gamma``.

    gamma = 1: mean of ``sqrt(n)(dro - erm)`` against ``-b_c`` in standard errors.
    gamma < 1: log-log slope of mean ``||dro - theta*||`` over ``n_grid``.
    gamma > 1: mean ``sqrt(n)||dro - erm||`` along ``n_grid``.
    """
    rule_cfg = SimConfig(cfg.theta_star, cfg.rho, cfg.sigma2, cfg.n, cfg.reps,
                         {"type": "power", "c": c, "gamma": gamma}, cfg.seed, cfg.p)
    grid = [cfg.n] if n_grid is None else list(n_grid)
    report = {"config": rule_cfg.to_dict(), "c": c, "gamma": gamma, "nGrid": grid, "levels": []}
    th = np.asarray(cfg.theta_star, dtype=float)
    for n in grid:
        out = pmap(lambda r: _fit_pair(rule_cfg, n, r), range(cfg.reps))
        erm = np.array([o[0] for o in out])
        dro = np.array([o[1] for o in out])
        D = math.sqrt(n) * (dro - erm)
        report["levels"].append({
            "n": n,
            "meanScaledGap": D.mean(axis=0).tolist(),
            "seScaledGap": (D.std(axis=0, ddof=1) / math.sqrt(cfg.reps)).tolist(),
            "meanGapNorm": float(np.linalg.norm(D, axis=1).mean()),
            "meanErrorDro": float(np.linalg.norm(dro - th, axis=1).mean()),
            "meanErrorErm": float(np.linalg.norm(erm - th, axis=1).mean()),
        })
    b = population_bias(cfg, c)
    report["biasTerm"] = b.tolist()
    if gamma == 1.0:
        lv = report["levels"][-1]
        z = (np.array(lv["meanScaledGap"]) + b) / np.array(lv["seScaledGap"])
        report["zScores"] = z.tolist()
    if len(grid) >= 2:
        ln = np.log(np.array(grid, dtype=float))
        le = np.log([lv["meanErrorDro"] for lv in report["levels"]])
        report["slope"] = float(np.polyfit(ln, le, 1)[0])
    return report


def simulate_coverage(cfg, alpha=0.1, k_dirs=200, draws=None):
    """Coverage of theta*, the ERM and the DRO fits by the ellipsoidal region.

    Also checks per replication that every halfspace bound dominates the
    ellipsoid's support function (the ellipsoid lies inside the polyhedron).
    """
    model = RegressionModel()
    th = np.asarray(cfg.theta_star, dtype=float)

    def one(r):
        Z = sample_regression(cfg, cfg.n, r)
        hs, ell, info = build_region(model, Z, alpha, k=k_dirs, seed=_rep_seed(cfg, cfg.n, r),
                                     draws=draws, p=cfg.p)
        delta = info["eta"] / cfg.n
        dro = fit_sqrt_lasso(Z, delta, cfg.p).theta
        sup = np.array([ell.support(u) for u in hs.directions])
        nested = bool(np.all(sup <= hs.bounds * (1 + 1e-9) + 1e-12))
        return (region_contains(ell, th), region_contains(ell, info["theta"]),
                region_contains(ell, dro, tol=1e-9), nested, info["eta"])

    out = pmap(one, range(cfg.reps))
    arr = np.array([o[:4] for o in out], dtype=bool)
    cov = arr[:, :3].mean(axis=0)
    se = np.sqrt(cov * (1 - cov) / cfg.reps)
    return {"config": cfg.to_dict(), "alpha": alpha,
            "coverageThetaStar": float(cov[0]), "coverageErm": float(cov[1]),
            "coverageDro": float(cov[2]), "se": se.tolist(),
            "nestedAll": bool(arr[:, 3].all()),
            "meanEta": float(np.mean([o[4] for o in out]))}


# ---------------------------------------------------------------- inf-sup

@dataclass
class FiniteGame:
    """Loss ``a(x) * theta + b(x)`` on a finite support with theta in ``[lo, hi]``."""

    atoms: np.ndarray
    weights: np.ndarray
    a: np.ndarray
    b: np.ndarray
    delta: float
    lo: float = -1.0
    hi: float = 1.0
    cost: CostSpec = field(default_factory=CostSpec)

    @property
    def lipschitz(self):
        return float(np.abs(self.a).max())

    def ref(self):
        return DiscreteDistribution(self.atoms, self.weights)


def random_game(rng, k=3, dim=1, delta=None):
    atoms = rng.normal(size=(k, dim))
    w = rng.dirichlet(np.ones(k))
    w = w / w.sum()
    return FiniteGame(atoms, w, rng.normal(size=k), rng.normal(size=k),
                      float(rng.uniform(0.05, 1.0) if delta is None else delta))


def _worst_case(game, theta):
    f = game.a * theta + game.b
    val, cp = worstcase_expectation_primal(f, game.ref(), game.delta, game.cost)
    return val, cp


def _maxmin(game, thetas):
    """``max_P min_theta E_P[loss]`` over the coupling polytope, as an epigraph LP."""
    C = game.cost.pairwise(game.atoms, game.atoms)
    k = C.shape[0]
    idx = np.argwhere(np.isfinite(C))
    nv = idx.shape[0]
    # variables: pi (nv) | t_plus | t_minus
    c = np.zeros(nv + 2)
    c[nv], c[nv + 1] = 1.0, -1.0
    rows, rhs = [], []
    for th in thetas:
        f = game.a * th + game.b
        r = np.zeros(nv + 2)
        r[:nv] = -f[idx[:, 1]]
        r[nv], r[nv + 1] = 1.0, -1.0
        rows.append(r)
        rhs.append(0.0)
    budget = np.zeros(nv + 2)
    budget[:nv] = C[idx[:, 0], idx[:, 1]]
    rows.append(budget)
    rhs.append(game.delta)
    A_eq = np.zeros((k, nv + 2))
    A_eq[idx[:, 0], np.arange(nv)] = 1.0
    res = linprog_max(c, A_ub=np.array(rows), b_ub=np.array(rhs), A_eq=A_eq, b_eq=game.weights)
    pi = np.zeros((k, k))
    pi[idx[:, 0], idx[:, 1]] = res.x[:nv]
    return res.value, pi.sum(axis=0)


def infsup_gap(game, grid_points=41):
    """Grid min-max against the exact max-min, with the certified grid bound.

    The worst-case risk is Lipschitz in theta with constant ``max|a|``, so the
    grid min-max exceeds the true value by at most ``max|a| * h / 2``.
    """
    thetas = np.linspace(game.lo, game.hi, grid_points)
    h = thetas[1] - thetas[0]
    F = np.array([_worst_case(game, t)[0] for t in thetas])
    j = int(np.argmin(F))
    minmax = float(F[j])
    maxmin, p_hat = _maxmin(game, thetas)
    bound = game.lipschitz * h / 2.0
    # epsilon-Nash certificate at (theta_hat, P_hat)
    eps = 2.0 * bound
    r_hat = float(p_hat @ (game.a * thetas[j] + game.b))
    r_theta = np.array([float(p_hat @ (game.a * t + game.b)) for t in thetas])
    nash = bool(minmax - eps <= r_hat + 1e-12 and r_hat <= r_theta.min() + eps + 1e-12)
    return {"minmax": minmax, "maxmin": float(maxmin), "gap": abs(minmax - maxmin),
            "bound": bound, "gridStep": float(h), "thetaHat": float(thetas[j]),
            "pHat": p_hat.tolist(), "nashCertificate": nash}


def finite_sample_bound(M, L, diam, r, dudley_c, delta, eps, n):
    """``n^{-1/2} [48 C + 48 L diam^r delta^{-1+1/r} + 3 M / sqrt(2) log(2/eps)]``."""
    if min(M, L, diam, dudley_c, delta, n) <= 0 or r < 1 or not 0 < eps < 1:
        raise ValueError("constants must be positive, r >= 1 and eps in (0, 1)")
    c0 = 48.0 * dudley_c
    c1 = 48.0 * L * diam ** r
    c3 = 3.0 * M / math.sqrt(2.0)
    return (c0 + c1 * delta ** (-1.0 + 1.0 / r) + c3 * math.log(2.0 / eps)) / math.sqrt(n)

"""Wasserstein distributionally robust estimation, radius selection and inference."""

__version__ = "0.1.0"

from .estimators import FitResult, fit_dr_mean_variance, fit_erm_ols, fit_sqrt_lasso
from .exceptions import WDROError
from .fairness import fairness_test
from .inference import EllipsoidRegion, HalfspaceRegion, build_region, region_contains
from .models import MeanModel, PortfolioModel, RegressionModel, get_model
from .ot import Coupling, CostSpec, DiscreteDistribution, transport_cost
from .profile import profile_value
from .radius import estimate_radius, phi_star, sqrt_lasso_radius
from .worstcase import robust_risk_dual, variation_norm

__all__ = [
    "Coupling", "CostSpec", "DiscreteDistribution", "EllipsoidRegion", "FitResult",
    "HalfspaceRegion", "MeanModel", "PortfolioModel", "RegressionModel", "WDROError",
    "build_region", "estimate_radius", "fairness_test", "fit_dr_mean_variance", "fit_erm_ols",
    "fit_sqrt_lasso", "get_model", "phi_star", "profile_value", "region_contains",
    "robust_risk_dual", "sqrt_lasso_radius", "transport_cost", "variation_norm",
]

from .battery import RegressionSpec, build_spec_battery
from .correlation import spearman
from .lmm import MixedModelFit, fit_reml, lmm_fit
from .loess import loess
from .multitest import benjamini_hochberg
from .ols import CoefficientEstimate, OLSFit, RankDeficientError, ols_fit, standardize

__all__ = [
    "CoefficientEstimate", "MixedModelFit", "OLSFit", "RankDeficientError", "RegressionSpec",
    "benjamini_hochberg", "build_spec_battery", "fit_reml", "lmm_fit", "loess", "ols_fit",
    "spearman", "standardize",
]

"""Least squares, F tests, Granger causality and GLM estimation."""

from .fdist import betainc, f_cdf, f_sf
from .glm import GlmFit, aic, glm_fit, glm_predict, score, stepwise_aic
from .regression import GrangerResult, OlsFit, SingularDesignError, granger_test, ols_fit

__all__ = [
    "GlmFit",
    "GrangerResult",
    "OlsFit",
    "SingularDesignError",
    "aic",
    "betainc",
    "f_cdf",
    "f_sf",
    "glm_fit",
    "glm_predict",
    "granger_test",
    "ols_fit",
    "score",
    "stepwise_aic",
]

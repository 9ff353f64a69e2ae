"""
Poisson and logistic GLMs with stepwise AIC
===========================================

Fit by iteratively reweighted least squares, then let a bidirectional AIC
search drop predictors that do not earn their parameter.
"""

import numpy as np

from unrestcast.inference import glm_fit, glm_predict, stepwise_aic

rng = np.random.default_rng(1)
n = 60
X = rng.normal(size=(n, 4))
names = ["signal", "noise_a", "noise_b", "noise_c"]
y = rng.poisson(np.exp(1.0 + 0.7 * X[:, 0])).astype(float)

full = glm_fit(X, y, "poisson", names)
print("full model AIC", round(full.aic, 3), "iterations", full.iterations)

chosen = stepwise_aic(X, y, "poisson", names)
print("stepwise keeps", chosen.selected_terms, "AIC", round(chosen.aic, 3))
print("coefficients", np.round(chosen.coefficients, 3))

# Predictions for two new weeks, by column name
print(glm_predict(chosen, {"signal": [0.0, 1.0]}))

# Logistic: high-protest weeks
high = (y > np.quantile(y, 0.75)).astype(float)
logit = stepwise_aic(X, high, "logistic", names)
print("logistic keeps", logit.selected_terms, "converged", logit.converged)

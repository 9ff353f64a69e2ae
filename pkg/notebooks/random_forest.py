"""
Seeded random forests
=====================

Every tree draws its bootstrap and split candidates from a generator built
from (seed, tree index), so a forest is reproducible whatever order the
trees are grown in.
"""

import numpy as np

from unrestcast.forest import fit_forest, forest_predict, forest_to_json, oob_error

rng = np.random.default_rng(2)
x = rng.uniform(0, 1, 200)
X = np.column_stack([x, rng.uniform(size=200), rng.uniform(size=200)])
step = (x > 0.5).astype(float)

clf = fit_forest(X, step, "classification", seed=0, feature_names=["x", "u1", "u2"])
print("trees", len(clf), "mtry", clf.mtry, "OOB error", oob_error(clf, X, step))

# Regression on counts: predictions stay inside the training range
counts = rng.poisson(3 + 10 * x).astype(float)
reg = fit_forest(X, counts, "regression", seed=0)
grid = np.column_stack([np.linspace(-1, 2, 7), np.full(7, 0.5), np.full(7, 0.5)])
print(np.round(forest_predict(reg, grid), 2), "range", counts.min(), counts.max())

# Same seed, same forest
again = fit_forest(X, counts, "regression", seed=0)
print("identical:", forest_to_json(reg) == forest_to_json(again))

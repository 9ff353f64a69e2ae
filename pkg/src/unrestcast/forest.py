"""Random forests of CART trees for binary classification and regression.

Each tree is grown on a bootstrap resample with its own generator derived
from ``(master_seed, tree_index)``, so a forest depends only on its data and
seed.  Per tree, the generator first draws the bootstrap indices and then a
block of uniform keys, one row per potential node, whose argsort gives that
node's candidate features.  Trees are stored as flat preorder arrays.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numba import njit

N_TREES = 500
MIN_NODE = {"classification": 1, "regression": 5}
FORMAT_VERSION = 1


class ForestError(ValueError):
    pass


@dataclass(frozen=True)
class Tree:
    """Preorder node arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.intp)
        rows = np.arange(X.shape[0])
        active = self.feature[node] >= 0
        while active.any():
            idx = rows[active]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


@dataclass(frozen=True)
class Forest:
    task: str
    trees: tuple[Tree, ...] = field(repr=False)
    mtry: int
    master_seed: int
    feature_names: tuple[str, ...]
    tie_class: int = 0
    inbag: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.trees)


def default_mtry(n_features: int) -> int:
    return max(1, int(math.isqrt(n_features)))


def tree_rng(master_seed: int, tree_index: int) -> np.random.Generator:
    """Generator for one tree; independent of how many trees run or in what order."""
    return np.random.default_rng([int(master_seed), int(tree_index)])


@njit(cache=True)
def _grow(X, y, rows, keys, classification, min_node, mtry, tie_class):
    """Grow one tree; returns preorder node arrays and the node count.

    Node k samples its candidate features as the first ``mtry`` entries of
    ``argsort(keys[k])``.  Splits maximise sum_c n_c^2 / n over the children
    (Gini) or S^2 / n (variance), which is equivalent to maximising the
    impurity decrease.
    """
    n_rows = rows.shape[0]
    p = X.shape[1]
    cap = keys.shape[0]
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    idx = rows.copy()
    xs = np.empty(n_rows)
    ys = np.empty(n_rows)
    # stack entries: start, end, parent, side (0 root, 1 left, 2 right)
    stack = np.empty((cap + 1, 4), dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = n_rows
    stack[0, 2] = -1
    stack[0, 3] = 0
    top = 1
    n_nodes = 0
    while top > 0:
        top -= 1
        lo = stack[top, 0]
        hi = stack[top, 1]
        parent_id = stack[top, 2]
        side = stack[top, 3]
        node = n_nodes
        n_nodes += 1
        if side == 1:
            left[parent_id] = node
        elif side == 2:
            right[parent_id] = node
        n = hi - lo
        total = 0.0
        for r in range(lo, hi):
            total += y[idx[r]]
        if classification:
            neg = n - total
            if total > neg:
                value[node] = 1.0
            elif total < neg:
                value[node] = 0.0
            else:
                value[node] = tie_class
            pure = total == 0.0 or total == n
            parent_crit = (total * total + neg * neg) / n
        else:
            value[node] = total / n
            pure = True
            y0 = y[idx[lo]]
            for r in range(lo, hi):
                if y[idx[r]] != y0:
                    pure = False
                    break
            parent_crit = total * total / n
        if n <= min_node or pure:
            continue
        order_f = np.argsort(keys[node])
        best_crit = -np.inf
        best_f = -1
        best_thr = 0.0
        for j in range(mtry):
            f = order_f[j]
            for r in range(n):
                xs[r] = X[idx[lo + r], f]
            perm = np.argsort(xs[:n])
            cum = 0.0
            for k in range(n - 1):
                cum += y[idx[lo + perm[k]]]
                a = xs[perm[k]]
                b = xs[perm[k + 1]]
                if not a < b:
                    continue
                nl = k + 1.0
                nr = n - nl
                if classification:
                    negl = nl - cum
                    posr = total - cum
                    negr = nr - posr
                    crit = (cum * cum + negl * negl) / nl + (posr * posr + negr * negr) / nr
                else:
                    sr = total - cum
                    crit = cum * cum / nl + sr * sr / nr
                if crit > best_crit:
                    best_crit = crit
                    best_f = f
                    best_thr = 0.5 * (a + b)
        if best_f < 0 or best_crit - parent_crit <= 1e-12 * max(abs(parent_crit), 1.0):
            continue
        # partition idx[lo:hi] so rows going left come first
        mid = lo
        for r in range(lo, hi):
            if X[idx[r], best_f] <= best_thr:
                tmp = idx[mid]
                idx[mid] = idx[r]
                idx[r] = tmp
                mid += 1
        feature[node] = best_f
        threshold[node] = best_thr
        stack[top, 0] = mid
        stack[top, 1] = hi
        stack[top, 2] = node
        stack[top, 3] = 2
        top += 1
        stack[top, 0] = lo
        stack[top, 1] = mid
        stack[top, 2] = node
        stack[top, 3] = 1
        top += 1
    return feature, threshold, left, right, value, n_nodes


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    rows: np.ndarray,
    task: str,
    mtry: int,
    rng: np.random.Generator,
    tie_class: int = 0,
) -> Tree:
    """Grow one unpruned tree on the (possibly repeated) row indices ``rows``."""
    n = len(rows)
    keys = rng.random((max(2 * n - 1, 1), X.shape[1]))
    f, th, le, ri, v, m = _grow(
        np.ascontiguousarray(X, dtype=np.float64),
        np.ascontiguousarray(y, dtype=np.float64),
        np.asarray(rows, dtype=np.int64),
        keys,
        task == "classification",
        MIN_NODE[task],
        int(mtry),
        float(tie_class),
    )
    return Tree(f[:m].astype(np.intp), th[:m], le[:m].astype(np.intp), ri[:m].astype(np.intp), v[:m])


def _as_matrix(rows, feature_names: Sequence[str] | None) -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(rows, Mapping):
        names = tuple(feature_names) if feature_names is not None else tuple(rows)
        missing = [n for n in names if n not in rows]
        if missing:
            raise ForestError(f"missing features {missing}")
        X = np.column_stack([np.asarray(rows[n], dtype=float) for n in names])
        return X, names
    X = np.asarray(rows, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    names = tuple(feature_names) if feature_names is not None else tuple(f"x{j}" for j in range(X.shape[1]))
    if len(names) != X.shape[1]:
        raise ForestError(f"{len(names)} feature names for {X.shape[1]} columns")
    return X, names


def fit_forest(
    X,
    y,
    task: str,
    seed: int,
    feature_names: Sequence[str] | None = None,
    n_trees: int = N_TREES,
    mtry: int | None = None,
) -> Forest:
    """Grow a random forest.

    ``X`` is an array (rows x features) or a mapping of feature name to
    column.  Classification expects 0/1 labels and grows trees to purity;
    regression stops splitting at five or fewer rows.
    """
    if task not in MIN_NODE:
        raise ForestError(f"unknown task {task!r}")
    X, names = _as_matrix(X, feature_names)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if len(y) != n:
        raise ForestError("X and y differ in length")
    if p < 1:
        raise ForestError("need at least one predictor")
    if n < max(5, MIN_NODE[task]):
        raise ForestError(f"need at least 5 training rows, got {n}")
    if task == "classification" and not np.all((y == 0) | (y == 1)):
        raise ForestError("classification labels must be 0/1")
    mtry = default_mtry(p) if mtry is None else int(mtry)
    if not 1 <= mtry <= p:
        raise ForestError(f"mtry {mtry} outside [1, {p}]")
    pos = float(y.sum())
    tie_class = 1 if task == "classification" and pos > n - pos else 0

    trees = []
    inbag = np.zeros((n_trees, n), dtype=bool)
    for t in range(n_trees):
        rng = tree_rng(seed, t)
        rows = rng.integers(0, n, size=n)
        inbag[t, rows] = True
        trees.append(grow_tree(X, y, rows, task, mtry, rng, tie_class))
    return Forest(task, tuple(trees), mtry, int(seed), names, tie_class, inbag)


def _vote(votes: np.ndarray, n_trees: np.ndarray | int, tie_class: int) -> np.ndarray:
    twice = 2 * votes
    return np.where(twice > n_trees, 1.0, np.where(twice < n_trees, 0.0, float(tie_class)))


def tree_outputs(forest: Forest, rows) -> np.ndarray:
    """Per-tree predictions, shape (n_trees, n_rows)."""
    X, _ = _as_matrix(rows, forest.feature_names)
    return np.vstack([tree.predict(X) for tree in forest.trees])


def forest_predict(forest: Forest, rows) -> np.ndarray:
    """Mean of tree outputs (regression) or majority vote (classification).

    Vote ties go to the training majority class, and to class 0 when the
    training classes were balanced.
    """
    out = tree_outputs(forest, rows)
    if forest.task == "regression":
        return out.mean(axis=0)
    return _vote(out.sum(axis=0), len(forest.trees), forest.tie_class)


def oob_predictions(forest: Forest, X) -> np.ndarray:
    """Out-of-bag predictions for the training rows; NaN where a row is in every bag."""
    if forest.inbag is None:
        raise ForestError("forest carries no in-bag record")
    out = tree_outputs(forest, X)
    oob = ~forest.inbag
    counts = oob.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        if forest.task == "regression":
            pred = np.where(oob, out, 0.0).sum(axis=0) / counts
        else:
            pred = _vote(np.where(oob, out, 0.0).sum(axis=0), counts, forest.tie_class)
    return np.where(counts > 0, pred, np.nan)


def oob_error(forest: Forest, X, y) -> float:
    """Misclassification rate (classification) or mean squared error (regression)."""
    y = np.asarray(y, dtype=float)
    pred = oob_predictions(forest, X)
    ok = ~np.isnan(pred)
    if forest.task == "classification":
        return float(np.mean(pred[ok] != y[ok]))
    return float(np.mean((pred[ok] - y[ok]) ** 2))


def forest_to_json(forest: Forest) -> str:
    """Serialize as a header followed by one preorder node list per tree."""
    payload = {
        "format": "unrestcast-forest",
        "version": FORMAT_VERSION,
        "task": forest.task,
        "mtry": forest.mtry,
        "seed": forest.master_seed,
        "features": list(forest.feature_names),
        "tie_class": forest.tie_class,
        "trees": [
            [
                [int(f), float(th), int(l), int(r), float(v)]
                for f, th, l, r, v in zip(t.feature, t.threshold, t.left, t.right, t.value)
            ]
            for t in forest.trees
        ],
    }
    return json.dumps(payload, separators=(",", ":"))


def forest_from_json(text: str) -> Forest:
    payload = json.loads(text)
    if payload.get("format") != "unrestcast-forest":
        raise ForestError("not a serialized forest")
    if payload.get("version") != FORMAT_VERSION:
        raise ForestError(f"unsupported forest format version {payload.get('version')}")
    trees = []
    for nodes in payload["trees"]:
        cols = list(zip(*nodes))
        trees.append(
            Tree(
                np.asarray(cols[0], dtype=np.intp),
                np.asarray(cols[1], dtype=float),
                np.asarray(cols[2], dtype=np.intp),
                np.asarray(cols[3], dtype=np.intp),
                np.asarray(cols[4], dtype=float),
            )
        )
    return Forest(
        payload["task"],
        tuple(trees),
        int(payload["mtry"]),
        int(payload["seed"]),
        tuple(payload["features"]),
        int(payload["tie_class"]),
    )

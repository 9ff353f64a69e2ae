"""Logistic and Poisson GLMs fitted by iteratively reweighted least squares."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit, gammaln

from .regression import SingularDesignError, _qr_solve

FAMILIES = ("logistic", "poisson")

TOL = 1e-8
MAX_ITER = 25
ETA_CLAMP = 30.0


@dataclass(frozen=True)
class GlmFit:
    family: str
    coefficients: np.ndarray = field(repr=False)  # intercept first
    deviance: float
    log_likelihood: float
    aic: float
    converged: bool
    selected_terms: tuple[str, ...] = ()
    iterations: int = 0

    @property
    def n_coefficients(self) -> int:
        return len(self.coefficients)


def _check_family(family: str) -> None:
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


def _inverse_link(family: str, eta: np.ndarray) -> np.ndarray:
    return expit(eta) if family == "logistic" else np.exp(eta)


def log_likelihood(family: str, y: np.ndarray, mu: np.ndarray) -> float:
    if family == "logistic":
        mu = np.clip(mu, 1e-300, 1.0)
        one_minus = np.clip(1.0 - mu, 1e-300, 1.0)
        return float(np.sum(np.where(y > 0, np.log(mu), 0.0) + np.where(y < 1, np.log(one_minus), 0.0)))
    mu = np.maximum(mu, 1e-300)
    return float(np.sum(y * np.log(mu) - mu - gammaln(y + 1.0)))


def deviance(family: str, y: np.ndarray, mu: np.ndarray) -> float:
    if family == "logistic":
        return -2.0 * log_likelihood(family, y, mu)
    mu = np.maximum(mu, 1e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        term = np.where(y > 0, y * np.log(y / mu), 0.0)
    return float(2.0 * np.sum(term - (y - mu)))


def _design(X, n: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.size == 0:
        X = np.empty((n, 0))
    return np.hstack([np.ones((n, 1)), X])


def _validate_response(family: str, y: np.ndarray) -> None:
    if family == "logistic":
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("logistic response must be 0/1")
    elif np.any(y < 0) or not np.all(y == np.round(y)):
        raise ValueError("poisson response must be non-negative integers")


def glm_fit(X, y, family: str, names: Sequence[str] | None = None) -> GlmFit:
    """Maximum-likelihood GLM with intercept; ``X`` holds predictors only.

    Fits that hit the linear-predictor clamp (complete or quasi-complete
    separation) or exhaust the iteration cap come back with
    ``converged=False``.
    """
    _check_family(family)
    y = np.asarray(y, dtype=float)
    n = len(y)
    D = _design(X, n)
    p = D.shape[1]
    if names is None:
        names = tuple(f"x{j}" for j in range(1, p))
    names = tuple(names)
    if len(names) != p - 1:
        raise ValueError(f"{len(names)} names for {p - 1} predictor columns")
    _validate_response(family, y)
    if n < p:
        raise SingularDesignError(f"singular design: {n} rows < {p} coefficients")

    mu = (y + 0.5) / 2.0 if family == "logistic" else y + 0.1
    eta = np.log(mu / (1.0 - mu)) if family == "logistic" else np.log(mu)
    dev_old = deviance(family, y, mu)
    converged = False
    beta = np.zeros(p)
    it = 0
    for it in range(1, MAX_ITER + 1):
        w = mu * (1.0 - mu) if family == "logistic" else mu
        z = eta + (y - mu) / w
        sw = np.sqrt(w)
        beta = _qr_solve(D * sw[:, None], z * sw)
        eta = np.clip(D @ beta, -ETA_CLAMP, ETA_CLAMP)
        mu = _inverse_link(family, eta)
        dev = deviance(family, y, mu)
        if abs(dev - dev_old) / (abs(dev) + 0.1) < TOL:
            converged = True
            break
        dev_old = dev
    if np.any(np.abs(D @ beta) >= ETA_CLAMP):
        converged = False
    ll = log_likelihood(family, y, mu)
    return GlmFit(
        family=family,
        coefficients=beta,
        deviance=deviance(family, y, mu),
        log_likelihood=ll,
        aic=-2.0 * ll + 2.0 * p,
        converged=converged,
        selected_terms=names,
        iterations=it,
    )


def aic(fit: GlmFit) -> float:
    return -2.0 * fit.log_likelihood + 2.0 * fit.n_coefficients


def score(fit: GlmFit, X, y) -> np.ndarray:
    """Gradient of the log-likelihood at the fitted coefficients."""
    y = np.asarray(y, dtype=float)
    D = _design(X, len(y))
    mu = _inverse_link(fit.family, np.clip(D @ fit.coefficients, -ETA_CLAMP, ETA_CLAMP))
    return D.T @ (y - mu)


def glm_predict(fit: GlmFit, X_new) -> np.ndarray:
    """Inverse-link predictions: probabilities (logistic) or expected counts (Poisson).

    ``X_new`` is either a mapping from term name to column, which must cover
    ``fit.selected_terms``, or an array whose columns follow that order.
    """
    terms = fit.selected_terms
    if isinstance(X_new, Mapping):
        missing = [t for t in terms if t not in X_new]
        if missing:
            raise KeyError(f"missing columns for terms {missing}")
        lengths = {len(np.atleast_1d(X_new[t])) for t in terms}
        if len(lengths) > 1:
            raise ValueError("columns differ in length")
        n = lengths.pop() if lengths else len(np.atleast_1d(next(iter(X_new.values()))))
        X = np.column_stack([np.atleast_1d(np.asarray(X_new[t], dtype=float)) for t in terms]) if terms else np.empty((n, 0))
    else:
        X = np.asarray(X_new, dtype=float)
        if X.ndim == 1:
            X = X[:, None] if len(terms) == 1 else X[None, :]
        if X.shape[1] != len(terms):
            raise ValueError(f"expected {len(terms)} columns, got {X.shape[1]}")
    eta = np.clip(_design(X, X.shape[0]) @ fit.coefficients, -ETA_CLAMP, ETA_CLAMP)
    return _inverse_link(fit.family, eta)


def stepwise_aic(X, y, family: str, names: Sequence[str] | None = None) -> GlmFit:
    """Bidirectional stepwise AIC search starting from the full model.

    Each step takes the single add or drop with the lowest AIC and stops once
    no move improves on the current model.  Singular fits count as infinite
    AIC, so redundant columns are dropped rather than raising.  The intercept
    is always kept.
    """
    _check_family(family)
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.size == 0:
        X = np.empty((len(y), 0))
    k = X.shape[1]
    if names is None:
        names = [f"x{j}" for j in range(1, k + 1)]
    names = list(names)
    if len(names) != k:
        raise ValueError(f"{len(names)} names for {k} columns")

    cache: dict[tuple[int, ...], GlmFit | None] = {}

    def fit_subset(cols: tuple[int, ...]) -> GlmFit | None:
        if cols not in cache:
            try:
                cache[cols] = glm_fit(X[:, list(cols)], y, family, [names[c] for c in cols])
            except SingularDesignError:
                cache[cols] = None
        return cache[cols]

    def aic_of(cols: tuple[int, ...]) -> float:
        f = fit_subset(cols)
        return math.inf if f is None else f.aic

    current = tuple(range(k))
    current_aic = aic_of(current)
    while True:
        moves = [tuple(c for c in current if c != d) for d in current]
        moves += [tuple(sorted(current + (a,))) for a in range(k) if a not in current]
        if not moves:
            break
        scored = [(aic_of(m), m) for m in moves]
        best_aic, best = min(scored, key=lambda t: (t[0], len(t[1]), t[1]))
        if not best_aic < current_aic:
            break
        current, current_aic = best, best_aic

    empty = fit_subset(())
    result = fit_subset(current)
    if result is None or (empty is not None and empty.aic < result.aic):
        result = empty
    if result is None:
        raise SingularDesignError("intercept-only model is not estimable")
    return result

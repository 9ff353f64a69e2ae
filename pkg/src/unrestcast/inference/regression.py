"""Ordinary least squares and the nested-regression Granger F test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .fdist import f_sf


class SingularDesignError(np.linalg.LinAlgError):
    """Design matrix (possibly weighted) is rank deficient."""

    def __init__(self, msg: str = "singular design"):
        super().__init__(msg)


_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray
    rss: float
    df_residual: int
    n: int


def _qr_solve(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    q, r = np.linalg.qr(X, mode="reduced")
    diag = np.abs(np.diag(r))
    scale = np.linalg.norm(X, axis=0)
    if diag.size and (np.any(scale == 0) or np.any(diag <= _RANK_RTOL * scale)):
        raise SingularDesignError()
    return solve_triangular(r, q.T @ y, lower=False, check_finite=False)


def ols_fit(X, y) -> OlsFit:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n < p:
        raise SingularDesignError(f"singular design: {n} rows < {p} columns")
    beta = _qr_solve(X, y)
    resid = y - X @ beta
    return OlsFit(beta, float(resid @ resid), n - p, n)


@dataclass(frozen=True)
class GrangerResult:
    lag_order: int
    f_stat: float
    p_value: float
    df1: int
    df2: int
    degenerate: bool = False


def _lag_block(v: np.ndarray, order: int) -> np.ndarray:
    n = len(v)
    return np.column_stack([v[order - k : n - k] for k in range(1, order + 1)])


def granger_test(y, x, order: int) -> GrangerResult:
    """Does adding lags 1..order of ``x`` improve an AR(order) model of ``y``?

    Both regressions carry an intercept.  A perfect unrestricted fit is
    reported as p = 0 with ``degenerate=True``.
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    if y.shape != x.shape:
        raise ValueError("y and x must be aligned")
    if not 1 <= order:
        raise ValueError(f"lag order must be >= 1, got {order}")
    n = len(y)
    if n <= 2 * order + 1:
        raise ValueError(f"series length {n} too short for lag order {order}")
    target = y[order:]
    ones = np.ones((n - order, 1))
    restricted = np.hstack([ones, _lag_block(y, order)])
    unrestricted = np.hstack([restricted, _lag_block(x, order)])
    fit_r = ols_fit(restricted, target)
    fit_u = ols_fit(unrestricted, target)
    df2 = fit_u.df_residual
    if df2 < 1:
        raise ValueError("no residual degrees of freedom")
    centred = target - target.mean()
    tss = float(centred @ centred)
    if fit_u.rss <= 1e-20 * max(tss, 1e-300):
        return GrangerResult(order, float("inf"), 0.0, order, df2, degenerate=True)
    f_stat = max((fit_r.rss - fit_u.rss) / order, 0.0) / (fit_u.rss / df2)
    return GrangerResult(order, f_stat, f_sf(f_stat, order, df2), order, df2)

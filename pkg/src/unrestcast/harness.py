"""Rolling-window forecasting experiments and naive baselines."""

from __future__ import annotations

import datetime as dt
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import forest as rf
from .inference import SingularDesignError, glm_predict, granger_test, stepwise_aic
from .ingest import RegionDataset
from .timeseries import FeatureFrame, WeekIndex, WeeklySeries, quantile

logger = logging.getLogger(__name__)

OUTCOMES = ("binary", "count")
MODELS = ("glm", "random_forest", "naive")
HORIZONS = (1, 2, 3)

GLM_MAX_FEATURES = 8
RF_MIN_FEATURES = 9
ALPHA = 0.05
CLASS_CUTOFF = 0.5
MIN_TRAIN_WEEKS = 20


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class BinarySeries:
    region: str
    first_week: WeekIndex
    values: np.ndarray = field(repr=False)
    threshold: float

    def as_series(self, variable: str = "protests_high") -> WeeklySeries:
        return WeeklySeries(self.region, variable, self.first_week, self.values)


def binarize(target: WeeklySeries) -> BinarySeries:
    """1 where the count strictly exceeds the series' own third quartile."""
    if len(target) == 0:
        raise PlanError("empty target")
    threshold = quantile(target.values, 0.75)
    return BinarySeries(
        target.region, target.first_week, (target.values > threshold).astype(float), threshold
    )


def granger_pvalues(train: FeatureFrame, order: int) -> dict[str, float]:
    """Granger p-value of each usable predictor against the frame's target."""
    out = {}
    for name in sorted(train.names):
        try:
            res = granger_test(train.target, train.predictors[name], order)
        except (SingularDesignError, ValueError):
            continue
        out[name] = res.p_value
    return out


def _ranked(pvalues: dict[str, float]) -> list[str]:
    return [n for n, _ in sorted(pvalues.items(), key=lambda kv: (kv[1], kv[0]))]


def select_features_glm(train: FeatureFrame, i: int) -> list[str]:
    """Up to eight predictors with the smallest Granger p-values at lag ``i``.

    An empty list means no predictor was testable: fit intercept only.
    """
    return _ranked(granger_pvalues(train, i))[:GLM_MAX_FEATURES]


def select_features_rf(train: FeatureFrame, i: int) -> list[str]:
    """All predictors significant at lag ``i``, topped up to the nine best."""
    pvals = granger_pvalues(train, i)
    ranked = _ranked(pvals)
    significant = [n for n in ranked if pvals[n] < ALPHA]
    if len(significant) >= RF_MIN_FEATURES:
        return significant
    return ranked[:RF_MIN_FEATURES]


@dataclass(frozen=True)
class ExperimentPlan:
    region: str
    horizon: int
    outcome: str
    model: str
    initial_train_end: dt.date
    test_end: dt.date
    seed: int = 0
    n_trees: int = rf.N_TREES
    rf_binary_mode: str = "classification"
    round_counts: bool = False

    def __post_init__(self):
        if self.horizon not in HORIZONS:
            raise PlanError(f"horizon must be one of {HORIZONS}, got {self.horizon}")
        if self.outcome not in OUTCOMES:
            raise PlanError(f"unknown outcome {self.outcome!r}")
        if self.model not in MODELS:
            raise PlanError(f"unknown model {self.model!r}")
        if self.rf_binary_mode not in ("classification", "regression"):
            raise PlanError(f"unknown rf_binary_mode {self.rf_binary_mode!r}")
        if self.test_end <= self.initial_train_end:
            raise PlanError("test_end must come after initial_train_end")

    @property
    def train_end_week(self) -> WeekIndex:
        return WeekIndex.from_date(self.initial_train_end)

    @property
    def test_end_week(self) -> WeekIndex:
        return WeekIndex.from_date(self.test_end)

    @property
    def key(self) -> tuple:
        return (self.region, self.horizon, self.outcome, self.model)


@dataclass(frozen=True)
class ForecastEntry:
    week: WeekIndex
    y_true: float
    y_pred: float
    window_index: int
    fallback: bool = False


@dataclass(frozen=True)
class WindowLog:
    window_index: int
    train_start: WeekIndex
    train_end: WeekIndex
    selected_features: tuple[str, ...]
    model_terms: tuple[str, ...] = ()
    fallback: bool = False


@dataclass
class ForecastTrack:
    plan: ExperimentPlan
    entries: list[ForecastEntry]
    windows: list[WindowLog] = field(default_factory=list)
    truth: WeeklySeries | None = None
    threshold: float | None = None

    @property
    def weeks(self) -> list[WeekIndex]:
        return [e.week for e in self.entries]

    @property
    def y_true(self) -> np.ndarray:
        return np.array([e.y_true for e in self.entries])

    @property
    def y_pred(self) -> np.ndarray:
        return np.array([e.y_pred for e in self.entries])


def _outcome_series(dataset: RegionDataset, outcome: str) -> tuple[WeeklySeries, float | None]:
    target = dataset.target
    if outcome == "binary":
        b = binarize(target)
        return b.as_series(), b.threshold
    return target, None


def naive_forecast(
    target: WeeklySeries,
    i: int,
    outcome: str = "count",
    plan: ExperimentPlan | None = None,
    start: WeekIndex | None = None,
    end: WeekIndex | None = None,
    binarized: bool = False,
) -> ForecastTrack:
    """Forecast each week with the value observed ``i`` weeks earlier.

    For ``outcome="binary"`` a count series is binarized first, using its
    full-period threshold, unless ``binarized`` says it already is.  Without ``start``/``end`` every week that has an
    ``i``-weeks-earlier observation is forecast.
    """
    threshold = None
    if outcome == "binary" and not binarized:
        b = binarize(target)
        target, threshold = b.as_series(), b.threshold
    start = target.first_week + i if start is None else start
    end = target.last_week if end is None else end
    if start - target.first_week < i or end > target.last_week:
        raise PlanError("target does not cover the test weeks and the i weeks before them")
    entries = [
        ForecastEntry(
            week=w,
            y_true=target.value_at(w),
            y_pred=target.value_at(w - i),
            window_index=(w - start) // i,
        )
        for w in (start + k for k in range(end - start + 1))
    ]
    if plan is None:
        plan = ExperimentPlan(
            target.region, i, outcome, "naive",
            target.first_week.start_date, (end + 1).start_date,
        )
    return ForecastTrack(plan, entries, [], target, threshold)


def window_bounds(frame_start: WeekIndex, plan: ExperimentPlan) -> list[tuple[WeekIndex, WeekIndex]]:
    """(train_start, train_end) for each retraining window of a plan."""
    i = plan.horizon
    e0 = plan.train_end_week
    n_test = plan.test_end_week - e0
    n_windows = math.ceil(n_test / i)
    return [(frame_start + j * i, e0 + j * i) for j in range(n_windows)]


Selector = Callable[[FeatureFrame, int], list[str]]


def _lagged_rows(window: FeatureFrame, names: Sequence[str], i: int):
    """Training design on one window: targets at t, predictors at t - i."""
    X = window.matrix(names)
    return X[:-i], window.target[i:]


def rolling_forecast(
    dataset: RegionDataset,
    plan: ExperimentPlan,
    select_glm: Selector = select_features_glm,
    select_rf: Selector = select_features_rf,
) -> ForecastTrack:
    """Retrain every ``horizon`` weeks on a fixed-length rolling window.

    Window j covers [first week + j*i, initial train end + j*i]; it is used
    for feature selection and fitting, then forecasts the next ``i`` weeks
    from predictors lagged ``i`` weeks, so nothing after the window's end is
    seen.  Windows whose model cannot be fitted fall back to the naive
    forecast and are flagged.
    """
    frame = dataset.frame
    i = plan.horizon
    truth, threshold = _outcome_series(dataset, plan.outcome)
    e0, te = plan.train_end_week, plan.test_end_week
    if te > frame.last_week:
        raise PlanError(f"dataset ends {frame.last_week}, before test end {te}")
    if e0 - frame.first_week + 1 < MIN_TRAIN_WEEKS:
        raise PlanError(
            f"initial training window {frame.first_week}..{e0} is shorter than {MIN_TRAIN_WEEKS} weeks"
        )
    if frame.first_week + i > e0:
        raise PlanError("training window too short for the horizon")

    if plan.model == "naive":
        track = naive_forecast(truth, i, plan.outcome, plan, e0 + 1, te, binarized=True)
        track.threshold = threshold
        return track

    outcome_frame = FeatureFrame(frame.region, frame.first_week, truth.values, frame.predictors, truth.variable)
    entries: list[ForecastEntry] = []
    logs: list[WindowLog] = []
    for j, (w_start, w_end) in enumerate(window_bounds(frame.first_week, plan)):
        selection_frame = frame.window(w_start, w_end)
        train = outcome_frame.window(w_start, w_end)
        forecast_weeks = [w_end + k for k in range(1, i + 1) if w_end + k <= te]
        feature_rows = [w - i for w in forecast_weeks]
        assert selection_frame.last_week == w_end and all(w <= w_end for w in feature_rows)

        selector = select_glm if plan.model == "glm" else select_rf
        names = selector(selection_frame, i)
        preds: np.ndarray | None = None
        terms: tuple[str, ...] = ()
        try:
            X, y = _lagged_rows(train, names, i)
            X_new = frame.matrix(names)[[w - frame.first_week for w in feature_rows]]
            preds, terms = _fit_predict(plan, X, y, X_new, names, j)
        except (SingularDesignError, rf.ForestError) as exc:
            logger.info("%s window %d: falling back to naive (%s)", plan.key, j, exc)
        fallback = preds is None
        if fallback:
            preds = np.array([truth.value_at(w - i) for w in forecast_weeks])
        logs.append(WindowLog(j, w_start, w_end, tuple(names), terms, fallback))
        for w, p in zip(forecast_weeks, preds):
            entries.append(ForecastEntry(w, truth.value_at(w), float(p), j, fallback))
    return ForecastTrack(plan, entries, logs, truth, threshold)


def _fit_predict(plan: ExperimentPlan, X, y, X_new, names, window_index: int):
    if plan.model == "glm":
        family = "logistic" if plan.outcome == "binary" else "poisson"
        fit = stepwise_aic(X, y, family, names)
        cols = [list(names).index(t) for t in fit.selected_terms]
        out = glm_predict(fit, X_new[:, cols])
        if plan.outcome == "binary":
            out = (out > CLASS_CUTOFF).astype(float)
        elif plan.round_counts:
            out = np.round(out)
        return out, fit.selected_terms

    if not names:
        raise rf.ForestError("no predictors available")
    if plan.outcome == "binary" and plan.rf_binary_mode == "classification":
        task = "classification"
    else:
        task = "regression"
    forest = rf.fit_forest(X, y, task, plan.seed, names, n_trees=plan.n_trees)
    out = rf.forest_predict(forest, X_new)
    if plan.outcome == "binary" and task == "regression":
        out = (out > CLASS_CUTOFF).astype(float)
    elif plan.outcome == "count" and plan.round_counts:
        out = np.round(out)
    return out, tuple(names)

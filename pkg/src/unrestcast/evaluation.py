"""Forecast scores: confusion rates, shifted Pearson R^2 and horizon-scaled MASE.

Undefined values are NaN in memory and ``NA`` on disk, never 0.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .harness import MODELS, ExperimentPlan, ForecastEntry, ForecastTrack
from .timeseries import WeekIndex, WeeklySeries

NA = "NA"
BINARY_METRICS = ("tpr", "tnr", "bac")
COUNT_METRICS = ("r2_s0", "r2_s1", "r2_s2", "mase")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class BinaryMetrics:
    tp: int
    fp: int
    tn: int
    fn: int
    tpr: float
    tnr: float
    bac: float


@dataclass(frozen=True)
class CountMetrics:
    r2_shift0: float
    r2_shift1: float
    r2_shift2: float
    mase: float
    mae: float
    naive_mae: float


def is_defined(x: float) -> bool:
    return not (x is None or math.isnan(x))


def track_from_arrays(y_true, y_pred, horizon: int = 1, history=(), region: str = "test") -> ForecastTrack:
    """Wrap plain arrays as a track; ``history`` holds truth for the weeks just before."""
    y_true = np.asarray(y_true, dtype=float)
    y_pred = np.asarray(y_pred, dtype=float)
    if y_true.shape != y_pred.shape:
        raise EvaluationError("y_true and y_pred differ in length")
    history = np.asarray(history, dtype=float)
    first = WeekIndex(len(history))
    entries = [
        ForecastEntry(first + k, float(t), float(p), k // horizon)
        for k, (t, p) in enumerate(zip(y_true, y_pred))
    ]
    truth = WeeklySeries(region, "truth", WeekIndex(0), np.concatenate([history, y_true]))
    plan = ExperimentPlan(region, horizon, "count", "naive", WeekIndex(0).start_date, (first + len(y_true)).start_date)
    return ForecastTrack(plan, entries, [], truth)


def confusion_rates(track: ForecastTrack) -> BinaryMetrics:
    t = track.y_true.astype(bool)
    p = track.y_pred.astype(bool)
    tp = int(np.sum(t & p))
    fn = int(np.sum(t & ~p))
    tn = int(np.sum(~t & ~p))
    fp = int(np.sum(~t & p))
    tpr = tp / (tp + fn) if tp + fn else math.nan
    tnr = tn / (tn + fp) if tn + fp else math.nan
    return BinaryMetrics(tp, fp, tn, fn, tpr, tnr, 0.5 * (tpr + tnr))


def _r2(a: np.ndarray, b: np.ndarray) -> float:
    if len(a) < 3:
        return math.nan
    da = a - a.mean()
    db = b - b.mean()
    saa, sbb = float(da @ da), float(db @ db)
    if saa == 0.0 or sbb == 0.0:
        return math.nan
    r = float(da @ db) / math.sqrt(saa * sbb)
    return min(r * r, 1.0)


def pearson_r2(track: ForecastTrack, shift: int = 0) -> float:
    """Squared correlation of F_t with Y_{t-shift} over test weeks where both exist."""
    if shift < 0:
        raise EvaluationError("shift must be non-negative")
    truth = {e.week: e.y_true for e in track.entries}
    pairs = [(e.y_pred, truth[e.week - shift]) for e in track.entries if (e.week - shift) in truth]
    if not pairs:
        return math.nan
    f, y = (np.array(v) for v in zip(*pairs))
    return _r2(f, y)


def mase_from_arrays(truth, forecast, i: int) -> float:
    """MASE against the i-step naive forecast over the forecast span.

    ``truth`` runs through the forecast weeks, with at least ``i`` earlier
    weeks in front; ``forecast`` aligns with the last ``len(forecast)`` of them.
    """
    truth = np.asarray(truth, dtype=float)
    forecast = np.asarray(forecast, dtype=float)
    n = len(forecast)
    if n == 0 or len(truth) < n + i:
        raise EvaluationError("truth must cover the forecast span plus i earlier weeks")
    y = truth[-n:]
    naive = truth[len(truth) - n - i : len(truth) - i]
    scale = float(np.mean(np.abs(y - naive)))
    if scale == 0.0:
        return math.nan
    return float(np.mean(np.abs(y - forecast))) / scale


def mase(track: ForecastTrack, i: int | None = None) -> float:
    i = track.plan.horizon if i is None else i
    if track.truth is None:
        raise EvaluationError("track carries no truth history")
    weeks = track.weeks
    naive = np.array([track.truth.value_at(w - i) for w in weeks])
    y = track.y_true
    scale = float(np.mean(np.abs(y - naive)))
    if scale == 0.0:
        return math.nan
    return float(np.mean(np.abs(y - track.y_pred))) / scale


def count_metrics(track: ForecastTrack, naive: ForecastTrack) -> CountMetrics:
    """Count scores with the MASE scale taken from the matching naive track."""
    if track.weeks != naive.weeks:
        raise EvaluationError(f"{track.plan.key}: test weeks differ from the naive baseline")
    y = track.y_true
    mae = float(np.mean(np.abs(y - track.y_pred)))
    naive_mae = float(np.mean(np.abs(y - naive.y_pred)))
    return CountMetrics(
        pearson_r2(track, 0),
        pearson_r2(track, 1),
        pearson_r2(track, 2),
        mae / naive_mae if naive_mae > 0 else math.nan,
        mae,
        naive_mae,
    )


@dataclass(frozen=True)
class ReportRow:
    region: str
    horizon: int
    outcome: str
    model: str
    metric: str
    value: float

    def formatted_value(self) -> str:
        return NA if not is_defined(self.value) else repr(float(self.value))


def _model_rank(model: str) -> int:
    return MODELS.index(model) if model in MODELS else len(MODELS)


def build_report(tracks: Iterable[ForecastTrack]) -> list[ReportRow]:
    """One row per (region, horizon, outcome, model, metric)."""
    groups: dict[tuple, dict[str, ForecastTrack]] = defaultdict(dict)
    for tr in tracks:
        p = tr.plan
        groups[(p.region, p.horizon, p.outcome)][p.model] = tr
    rows: list[ReportRow] = []
    for (region, horizon, outcome), by_model in sorted(groups.items()):
        naive = by_model.get("naive")
        if naive is None:
            raise EvaluationError(f"no naive baseline for {(region, horizon, outcome)}")
        for model in sorted(by_model, key=lambda m: (_model_rank(m), m)):
            tr = by_model[model]
            if tr.weeks != naive.weeks:
                raise EvaluationError(f"{tr.plan.key}: test weeks differ from the naive baseline")
            if outcome == "binary":
                m = confusion_rates(tr)
                values = {"tpr": m.tpr, "tnr": m.tnr, "bac": m.bac}
                names = BINARY_METRICS
            else:
                c = count_metrics(tr, naive)
                values = {"r2_s0": c.r2_shift0, "r2_s1": c.r2_shift1, "r2_s2": c.r2_shift2, "mase": c.mase}
                names = COUNT_METRICS
            rows.extend(ReportRow(region, horizon, outcome, model, k, values[k]) for k in names)
    return rows

"""CSV and JSON writers/readers for forecasts, selection logs, Granger tables and metrics."""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable

from .evaluation import NA, ReportRow
from .harness import ExperimentPlan, ForecastEntry, ForecastTrack
from .timeseries import WeekIndex

FORECAST_COLUMNS = (
    "region", "horizon", "outcome", "model", "week_start",
    "y_true", "y_pred", "window_index", "fallback_flag",
)
SELECTION_COLUMNS = (
    "region", "horizon", "window_index", "selected_features",
    "outcome", "model", "train_start", "train_end", "model_terms", "fallback_flag",
)
METRIC_COLUMNS = ("region", "horizon", "outcome", "model", "metric", "value")
GRANGER_COLUMNS = ("region", "predictor", "lag", "f_stat", "p_value", "df1", "df2", "status")
GRANGER_VIEW_COLUMNS = ("region", "predictor", "min_p_lag", "p_value", "significant")


def fmt(x: float | None) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return NA
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def _writer(path: Path, header: Iterable[str]):
    fh = Path(path).open("w", newline="", encoding="utf-8")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(list(header))
    return fh, w


def write_forecasts(tracks: Iterable[ForecastTrack], path: str | Path) -> None:
    fh, w = _writer(Path(path), FORECAST_COLUMNS)
    with fh:
        for tr in tracks:
            p = tr.plan
            for e in tr.entries:
                w.writerow([
                    p.region, p.horizon, p.outcome, p.model, str(e.week),
                    fmt(e.y_true), fmt(e.y_pred), e.window_index, int(e.fallback),
                ])


def write_selection(tracks: Iterable[ForecastTrack], path: str | Path) -> None:
    fh, w = _writer(Path(path), SELECTION_COLUMNS)
    with fh:
        for tr in tracks:
            p = tr.plan
            for log in tr.windows:
                w.writerow([
                    p.region, p.horizon, log.window_index, ";".join(log.selected_features),
                    p.outcome, p.model, str(log.train_start), str(log.train_end),
                    ";".join(log.model_terms), int(log.fallback),
                ])


def read_forecasts(path: str | Path) -> list[ForecastTrack]:
    """Rebuild tracks (without training logs or truth history) from forecasts.csv."""
    grouped: dict[tuple, list[ForecastEntry]] = defaultdict(list)
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in FORECAST_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        for row in reader:
            key = (row["region"], int(row["horizon"]), row["outcome"], row["model"])
            grouped[key].append(
                ForecastEntry(
                    WeekIndex.from_start(dt.date.fromisoformat(row["week_start"])),
                    float(row["y_true"]),
                    float(row["y_pred"]),
                    int(row["window_index"]),
                    bool(int(row["fallback_flag"])),
                )
            )
    tracks = []
    for (region, horizon, outcome, model), entries in grouped.items():
        entries.sort(key=lambda e: e.week)
        first, last = entries[0].week, entries[-1].week
        plan = ExperimentPlan(
            region, horizon, outcome, model,
            (first - 1).start_date, last.start_date,
        )
        tracks.append(ForecastTrack(plan, entries))
    return tracks


def write_metrics(rows: Iterable[ReportRow], path: str | Path) -> None:
    fh, w = _writer(Path(path), METRIC_COLUMNS)
    with fh:
        for r in rows:
            w.writerow([r.region, r.horizon, r.outcome, r.model, r.metric, r.formatted_value()])


def read_metrics(path: str | Path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_json(payload: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")

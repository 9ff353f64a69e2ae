"""Weekly time grid and the series primitives every other module builds on.

Weeks run Sunday through Saturday.  Week ordinals count from the epoch
Sunday 2020-01-05, so ordinal 0 is the first week of the search-volume data.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

EPOCH = dt.date(2020, 1, 5)


class SeriesError(ValueError):
    """Raised for malformed or misaligned weekly series."""


@dataclass(frozen=True, order=True)
class WeekIndex:
    ordinal: int

    @classmethod
    def from_date(cls, day: dt.date) -> "WeekIndex":
        """Week containing ``day`` (any weekday)."""
        return cls((day - EPOCH).days // 7)

    @classmethod
    def from_start(cls, start: dt.date) -> "WeekIndex":
        if start.weekday() != 6:
            raise SeriesError(f"week start {start.isoformat()} is not a Sunday")
        return cls.from_date(start)

    @property
    def start_date(self) -> dt.date:
        return EPOCH + dt.timedelta(weeks=self.ordinal)

    def __add__(self, k: int) -> "WeekIndex":
        return WeekIndex(self.ordinal + int(k))

    def __sub__(self, other):
        if isinstance(other, WeekIndex):
            return self.ordinal - other.ordinal
        return WeekIndex(self.ordinal - int(other))

    def __str__(self) -> str:
        return self.start_date.isoformat()


@dataclass(frozen=True)
class WeeklySeries:
    """One variable for one region on consecutive weeks starting at ``first_week``."""

    region: str
    variable: str
    first_week: WeekIndex
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float).copy()
        if arr.ndim != 1:
            raise SeriesError("values must be one-dimensional")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def last_week(self) -> WeekIndex:
        return self.first_week + (len(self.values) - 1)

    def weeks(self) -> list[WeekIndex]:
        return [self.first_week + k for k in range(len(self.values))]

    def value_at(self, week: WeekIndex) -> float:
        k = week - self.first_week
        if not 0 <= k < len(self.values):
            raise SeriesError(f"{self.variable}: week {week} outside series range")
        return float(self.values[k])

    def window(self, start: WeekIndex, end: WeekIndex) -> "WeeklySeries":
        """Sub-series on the inclusive range [start, end]."""
        lo, hi = start - self.first_week, end - self.first_week
        if lo < 0 or hi >= len(self.values) or hi < lo:
            raise SeriesError(
                f"{self.variable}: window {start}..{end} not inside "
                f"{self.first_week}..{self.last_week}"
            )
        return WeeklySeries(self.region, self.variable, start, self.values[lo : hi + 1])

    def renamed(self, variable: str) -> "WeeklySeries":
        return WeeklySeries(self.region, variable, self.first_week, self.values)


def _bin_daily(
    daily: Mapping[dt.date, float] | Iterable[tuple[dt.date, float]],
    start: dt.date | None,
    end: dt.date | None,
):
    items = list(daily.items()) if isinstance(daily, Mapping) else list(daily)
    if not items and (start is None or end is None):
        raise SeriesError("empty series")
    days = [d for d, _ in items]
    first = WeekIndex.from_date(start if start is not None else min(days))
    last = WeekIndex.from_date(end if end is not None else max(days))
    if last < first:
        raise SeriesError("empty series")
    n = last - first + 1
    sums = np.zeros(n)
    counts = np.zeros(n, dtype=int)
    for day, value in items:
        k = WeekIndex.from_date(day) - first
        if not 0 <= k < n:
            continue
        if value is None or (isinstance(value, float) and math.isnan(value)):
            continue
        sums[k] += value
        counts[k] += 1
    return first, sums, counts


def weekly_sum(
    daily,
    region: str = "",
    variable: str = "",
    start: dt.date | None = None,
    end: dt.date | None = None,
) -> WeeklySeries:
    """Sum dated values into Sunday-anchored weeks.

    ``daily`` is a mapping or an iterable of ``(date, value)`` pairs; repeated
    dates accumulate, so a list of ``(date, 1)`` per event yields event counts.
    The grid spans the weeks of the earliest to latest date unless ``start``
    and ``end`` widen or clip it.  Weeks without records are 0.
    """
    first, sums, _ = _bin_daily(daily, start, end)
    return WeeklySeries(region, variable, first, sums)


def weekly_mean(
    daily,
    region: str = "",
    variable: str = "",
    start: dt.date | None = None,
    end: dt.date | None = None,
) -> WeeklySeries:
    """Mean of the available daily values per week; fully missing weeks are 0.

    Missing days are ``None`` or NaN values, or simply absent dates.
    """
    first, sums, counts = _bin_daily(daily, start, end)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    return WeeklySeries(region, variable, first, means)


def pop_weighted_aggregate(
    series_by_subregion: Mapping[str, WeeklySeries],
    populations: Mapping[str, float],
    region: str | None = None,
    variable: str | None = None,
) -> WeeklySeries:
    if not series_by_subregion:
        raise SeriesError("no subregion series to aggregate")
    subs = sorted(series_by_subregion)
    ref = series_by_subregion[subs[0]]
    total = np.zeros(len(ref))
    weight = 0.0
    for name in subs:
        s = series_by_subregion[name]
        if s.first_week != ref.first_week or len(s) != len(ref):
            raise SeriesError(f"subregion {name!r} is not aligned with {subs[0]!r}")
        if name not in populations:
            raise SeriesError(f"missing population for subregion {name!r}")
        pop = float(populations[name])
        if not pop > 0:
            raise SeriesError(f"population for {name!r} must be positive, got {pop}")
        total += pop * s.values
        weight += pop
    return WeeklySeries(
        region if region is not None else ref.region,
        variable if variable is not None else ref.variable,
        ref.first_week,
        total / weight,
    )


def lag(series: WeeklySeries, k: int) -> WeeklySeries:
    """Shift forward by ``k`` weeks: output at week t is the input at t - k."""
    if k < 1:
        raise SeriesError(f"lag must be >= 1, got {k}")
    if k >= len(series):
        raise SeriesError(f"lag {k} >= series length {len(series)}")
    return WeeklySeries(series.region, series.variable, series.first_week + k, series.values[:-k])


def quantile(values: Sequence[float] | np.ndarray, p: float) -> float:
    """Linear-interpolation sample quantile (Hyndman-Fan type 7)."""
    x = np.sort(np.asarray(values, dtype=float))
    if x.size == 0:
        raise SeriesError("quantile of empty data")
    if not 0.0 <= p <= 1.0:
        raise SeriesError(f"p must lie in [0, 1], got {p}")
    h = (x.size - 1) * p
    lo = int(math.floor(h))
    if lo >= x.size - 1:
        return float(x[-1])
    return float(x[lo] + (h - lo) * (x[lo + 1] - x[lo]))


@dataclass(frozen=True)
class FeatureFrame:
    """Target plus named predictor columns sharing one contiguous week range."""

    region: str
    first_week: WeekIndex
    target: np.ndarray = field(repr=False)
    predictors: dict[str, np.ndarray] = field(repr=False)
    target_name: str = "protests"

    def __post_init__(self):
        n = len(self.target)
        for name, col in self.predictors.items():
            if len(col) != n:
                raise SeriesError(f"column {name!r} has {len(col)} rows, expected {n}")

    def __len__(self) -> int:
        return len(self.target)

    @property
    def last_week(self) -> WeekIndex:
        return self.first_week + (len(self.target) - 1)

    @property
    def names(self) -> list[str]:
        return list(self.predictors)

    def weeks(self) -> list[WeekIndex]:
        return [self.first_week + k for k in range(len(self.target))]

    def target_series(self) -> WeeklySeries:
        return WeeklySeries(self.region, self.target_name, self.first_week, self.target)

    def column(self, name: str) -> WeeklySeries:
        return WeeklySeries(self.region, name, self.first_week, self.predictors[name])

    def matrix(self, names: Sequence[str] | None = None) -> np.ndarray:
        names = self.names if names is None else list(names)
        if not names:
            return np.empty((len(self), 0))
        return np.column_stack([self.predictors[n] for n in names])

    def window(self, start: WeekIndex, end: WeekIndex) -> "FeatureFrame":
        lo, hi = start - self.first_week, end - self.first_week
        if lo < 0 or hi >= len(self) or hi < lo:
            raise SeriesError(
                f"window {start}..{end} not inside {self.first_week}..{self.last_week}"
            )
        return FeatureFrame(
            self.region,
            start,
            self.target[lo : hi + 1],
            {k: v[lo : hi + 1] for k, v in self.predictors.items()},
            self.target_name,
        )


def align(
    columns: Iterable[WeeklySeries],
    target: str | WeeklySeries | None = None,
) -> FeatureFrame:
    """Restrict series to their common week range.

    ``target`` names one of ``columns`` (or is an extra series) to serve as
    the frame's target; predictor columns are ordered by variable name.
    """
    cols = list(columns)
    if isinstance(target, WeeklySeries):
        tgt = target
    elif target is not None:
        matches = [c for c in cols if c.variable == target]
        if len(matches) != 1:
            raise SeriesError(f"target {target!r} not found exactly once")
        tgt = matches[0]
        cols = [c for c in cols if c is not tgt]
    else:
        tgt = None
    everything = cols + ([tgt] if tgt is not None else [])
    if not everything:
        raise SeriesError("nothing to align")
    regions = {c.region for c in everything}
    if len(regions) > 1:
        raise SeriesError(f"series from several regions: {sorted(regions)}")
    names = [c.variable for c in cols]
    if len(set(names)) != len(names):
        raise SeriesError("duplicate variable names")
    start = max(c.first_week for c in everything)
    end = min(c.last_week for c in everything)
    if end < start:
        raise SeriesError("series ranges do not overlap")
    preds = {c.variable: c.window(start, end).values for c in sorted(cols, key=lambda c: c.variable)}
    if tgt is not None:
        tvals = tgt.window(start, end).values
        tname = tgt.variable
    else:
        tvals = np.zeros(end - start + 1)
        tname = ""
    return FeatureFrame(regions.pop(), start, tvals, preds, tname or "protests")

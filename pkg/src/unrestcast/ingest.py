"""Read the raw event, policy and search-trend streams into per-region frames."""

from __future__ import annotations

import csv
import datetime as dt
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .timeseries import (
    FeatureFrame,
    SeriesError,
    WeekIndex,
    WeeklySeries,
    align,
    pop_weighted_aggregate,
    weekly_mean,
    weekly_sum,
)

logger = logging.getLogger(__name__)

INDICATOR_RANGES = {
    "C1": 3, "C2": 3, "C3": 2, "C4": 4, "C5": 2, "C6": 3, "C7": 2, "C8": 4,
    "E1": 2, "E2": 2,
    "H1": 2, "H2": 3, "H3": 2, "H6": 4, "H7": 5, "H8": 3,
}
INDICATORS = tuple(INDICATOR_RANGES)
INDICES = ("stringency", "gov_response", "containment_health", "econ_support")
HEALTH = ("cases", "deaths")
HEALTH_COLUMNS = {"cases": "confirmed_cases", "deaths": "confirmed_deaths"}
TREND_GROUPS = ("general", "covid", "lockdown", "school", "mask", "vaccine", "economic")
TREND_COLUMNS = tuple(f"trends_{g}" for g in TREND_GROUPS)

PREDICTORS = HEALTH + INDICATORS + INDICES + TREND_COLUMNS
TARGET = "protests"

COVID_KEYWORDS = ("coronavirus", "covid")


class IngestError(ValueError):
    """Invalid input data; ``line`` is the 1-based file line when known."""

    def __init__(self, msg: str, path: str | Path | None = None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + msg)
        self.path = path
        self.line = line


class Records(list):
    """Parsed rows plus the number dropped for falling outside the study window."""

    dropped: int = 0


@dataclass(frozen=True)
class EventRecord:
    date: dt.date
    region: str
    event_type: str
    description: str


@dataclass(frozen=True)
class PolicyRecord:
    date: dt.date
    region: str
    indicators: Mapping[str, float]
    indices: Mapping[str, float]
    cumulative: Mapping[str, float | None] = field(default_factory=dict)


@dataclass(frozen=True)
class TrendsRecord:
    week_start: dt.date
    region: str
    term: str
    volume: float


@dataclass(frozen=True)
class RegionConfig:
    """Maps subregions (states or countries) to regions, with populations."""

    region_of: Mapping[str, str]
    population: Mapping[str, float]

    def members(self, region: str) -> list[str]:
        return sorted(s for s, r in self.region_of.items() if r == region)

    @property
    def regions(self) -> list[str]:
        return sorted(set(self.region_of.values()))


@dataclass(frozen=True)
class RegionDataset:
    region: str
    frame: FeatureFrame
    n_events: int = 0

    @property
    def target(self) -> WeeklySeries:
        return self.frame.target_series()

    @property
    def predictors(self) -> FeatureFrame:
        return self.frame


def _parse_date(text: str, path, line: int, what: str = "date") -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise IngestError(f"malformed {what} {text!r}", path, line) from None


def _reader(path: str | Path, required: Sequence[str]):
    path = Path(path)
    if not path.exists():
        raise IngestError("file not found", path)
    fh = path.open(newline="", encoding="utf-8")
    reader = csv.DictReader(fh)
    header = reader.fieldnames or []
    missing = [c for c in required if c not in header]
    if missing:
        fh.close()
        raise IngestError(f"missing columns {missing}", path, 1)
    return fh, reader


def _in_window(day: dt.date, window) -> bool:
    if window is None:
        return True
    start, end = window
    return (start is None or day >= start) and (end is None or day <= end)


def parse_events(path: str | Path, window: tuple[dt.date, dt.date] | None = None) -> Records:
    """Parse ``date,region,event_type,description`` rows."""
    fh, reader = _reader(path, ("date", "region", "event_type", "description"))
    out = Records()
    with fh:
        for row in reader:
            line = reader.line_num
            if None in row.values() or None in row:
                raise IngestError("wrong number of fields", path, line)
            day = _parse_date(row["date"], path, line)
            if not _in_window(day, window):
                out.dropped += 1
                continue
            out.append(EventRecord(day, row["region"].strip(), row["event_type"].strip(), row["description"]))
    if out.dropped:
        logger.info("%s: dropped %d events outside the study window", path, out.dropped)
    return out


def filter_covid(events: Iterable[EventRecord]) -> list[EventRecord]:
    return [e for e in events if any(k in e.description.lower() for k in COVID_KEYWORDS)]


def _number(text: str | None, path, line: int, col: str) -> float | None:
    if text is None or text.strip() == "":
        return None
    try:
        value = float(text)
    except ValueError:
        raise IngestError(f"column {col}: not a number {text!r}", path, line) from None
    if math.isnan(value):
        return None
    return value


def parse_policy(path: str | Path, window: tuple[dt.date, dt.date] | None = None) -> Records:
    """Parse daily policy rows; blank indicator or index cells become 0.

    Extra columns (dollar-valued indicators, vaccine indicators, scope flags)
    are accepted and ignored.  ``confirmed_cases`` and ``confirmed_deaths``,
    when present, hold cumulative counts.
    """
    fh, reader = _reader(path, ("date", "region") + INDICATORS + INDICES)
    header = reader.fieldnames or []
    out = Records()
    with fh:
        for row in reader:
            line = reader.line_num
            if None in row:
                raise IngestError("too many fields", path, line)
            day = _parse_date(row["date"], path, line)
            if not _in_window(day, window):
                out.dropped += 1
                continue
            indicators = {}
            for code, top in INDICATOR_RANGES.items():
                v = _number(row[code], path, line, code)
                v = 0.0 if v is None else v
                if not (0 <= v <= top and v == int(v)):
                    raise IngestError(f"{code} value {v} outside ordinal range 0..{top}", path, line)
                indicators[code] = v
            indices = {}
            for name in INDICES:
                v = _number(row[name], path, line, name)
                v = 0.0 if v is None else v
                if not 0 <= v <= 100:
                    raise IngestError(f"{name} value {v} outside [0, 100]", path, line)
                indices[name] = v
            cumulative = {}
            for name, col in HEALTH_COLUMNS.items():
                if col in header:
                    v = _number(row[col], path, line, col)
                    if v is not None and v < 0:
                        raise IngestError(f"{col} is negative", path, line)
                    cumulative[name] = v
            out.append(PolicyRecord(day, row["region"].strip(), indicators, indices, cumulative))
    return out


def parse_trends(path: str | Path) -> Records:
    fh, reader = _reader(path, ("week_start", "region", "term", "volume"))
    out = Records()
    with fh:
        for row in reader:
            line = reader.line_num
            day = _parse_date(row["week_start"], path, line, "week_start")
            if day.weekday() != 6:
                raise IngestError(f"week_start {day} is not a Sunday", path, line)
            v = _number(row["volume"], path, line, "volume")
            if v is None:
                continue
            if not 0 <= v <= 100:
                raise IngestError(f"volume {v} outside [0, 100]", path, line)
            out.append(TrendsRecord(day, row["region"].strip(), row["term"].strip(), v))
    return out


def parse_groupings(path: str | Path) -> dict[str, str]:
    fh, reader = _reader(path, ("term", "group"))
    mapping: dict[str, str] = {}
    with fh:
        for row in reader:
            line = reader.line_num
            term, group = row["term"].strip(), row["group"].strip()
            if group not in TREND_GROUPS:
                raise IngestError(f"unknown group {group!r}", path, line)
            if term in mapping and mapping[term] != group:
                raise IngestError(f"term {term!r} assigned to two groups", path, line)
            mapping[term] = group
    return mapping


def parse_regions(path: str | Path) -> RegionConfig:
    fh, reader = _reader(path, ("subregion", "region", "population"))
    region_of: dict[str, str] = {}
    population: dict[str, float] = {}
    with fh:
        for row in reader:
            line = reader.line_num
            sub = row["subregion"].strip()
            if sub in region_of:
                raise IngestError(f"subregion {sub!r} listed twice", path, line)
            pop = _number(row["population"], path, line, "population")
            if pop is None or pop <= 0:
                raise IngestError(f"population for {sub!r} must be positive", path, line)
            region_of[sub] = row["region"].strip()
            population[sub] = pop
    return RegionConfig(region_of, population)


def build_trends_groups(
    records: Iterable[TrendsRecord],
    grouping_map: Mapping[str, str],
    region: str | None = None,
    start: WeekIndex | None = None,
    end: WeekIndex | None = None,
) -> dict[str, WeeklySeries]:
    """Average term volumes within each conceptual group, per week.

    Only terms with a value that week enter the mean; a group with no data
    in a week is 0.  Returns one series per group, keyed by ``trends_<group>``.
    """
    records = [r for r in records if region is None or r.region == region]
    unknown = sorted({r.term for r in records} - set(grouping_map))
    if unknown:
        raise IngestError(f"terms missing from the grouping map: {unknown}")
    weeks = [WeekIndex.from_start(r.week_start) for r in records]
    if start is None or end is None:
        if not weeks:
            raise SeriesError("empty series")
        start = min(weeks) if start is None else start
        end = max(weeks) if end is None else end
    n = end - start + 1
    sums = {g: np.zeros(n) for g in TREND_GROUPS}
    counts = {g: np.zeros(n) for g in TREND_GROUPS}
    for rec, week in zip(records, weeks):
        k = week - start
        if 0 <= k < n:
            g = grouping_map[rec.term]
            sums[g][k] += rec.volume
            counts[g][k] += 1
    name = region if region is not None else ""
    out = {}
    for g in TREND_GROUPS:
        vals = np.where(counts[g] > 0, sums[g] / np.maximum(counts[g], 1), 0.0)
        out[f"trends_{g}"] = WeeklySeries(name, f"trends_{g}", start, vals)
    return out


def _daily_from_cumulative(pairs: list[tuple[dt.date, float | None]]) -> list[tuple[dt.date, float]]:
    """Differences of a cumulative count; gaps carry forward, negative revisions clip to 0."""
    out = []
    prev = 0.0
    for day, cum in sorted(pairs):
        if cum is None:
            out.append((day, 0.0))
            continue
        out.append((day, max(cum - prev, 0.0)))
        prev = max(prev, cum)
    return out


def full_weeks(start: dt.date, end: dt.date) -> tuple[WeekIndex, WeekIndex]:
    """First and last weeks lying entirely inside [start, end]."""
    first = WeekIndex.from_date(start)
    if first.start_date < start:
        first = first + 1
    last = WeekIndex.from_date(end)
    if last.start_date + dt.timedelta(days=6) > end:
        last = last - 1
    if last < first:
        raise SeriesError(f"no complete week between {start} and {end}")
    return first, last


def build_region_dataset(
    events: Iterable[EventRecord],
    policy: Iterable[PolicyRecord],
    trends: Iterable[TrendsRecord],
    grouping_map: Mapping[str, str],
    regions_config: RegionConfig,
    region: str,
    event_window: tuple[dt.date, dt.date] | None = None,
) -> RegionDataset:
    """Aggregate every stream for ``region`` and align them on one weekly grid.

    Events are COVID-filtered, counted per week and summed over member
    subregions, as are daily cases and deaths.  Policy columns are weekly
    means, then population-weighted across members; so are trend groups.  The
    frame starts at the region's first week with a COVID-related event.
    """
    members = regions_config.members(region)
    if not members:
        raise IngestError(f"region {region!r} has no subregions in the regions file")
    for m in members:
        if m not in regions_config.population:
            raise IngestError(f"missing population for subregion {m!r}")
    member_set = set(members)
    pops = {m: regions_config.population[m] for m in members}

    covid = [e for e in filter_covid(events) if e.region in member_set]
    if not covid:
        raise IngestError(f"region {region!r} has no COVID-related events")
    if event_window is not None:
        first_w, last_w = full_weeks(*event_window)
    else:
        first_w = WeekIndex.from_date(min(e.date for e in covid))
        last_w = WeekIndex.from_date(max(e.date for e in covid))
    grid_start = first_w.start_date
    grid_end = last_w.start_date + dt.timedelta(days=6)
    target = weekly_sum(
        [(e.date, 1.0) for e in covid], region, TARGET, start=grid_start, end=grid_end
    )
    n_events = sum(1 for e in covid if grid_start <= e.date <= grid_end)
    positive = np.flatnonzero(target.values > 0)
    if positive.size == 0:
        raise IngestError(f"region {region!r} has no COVID-related events inside the window")
    first_protest = target.first_week + int(positive[0])

    by_member: dict[str, list[PolicyRecord]] = defaultdict(list)
    for rec in policy:
        if rec.region in member_set:
            by_member[rec.region].append(rec)
    absent = [m for m in members if not by_member[m]]
    if absent:
        raise IngestError(f"no policy rows for subregions {absent}")
    p_start = min(r.date for m in members for r in by_member[m])
    p_end = max(r.date for m in members for r in by_member[m])

    columns: list[WeeklySeries] = []
    for name in HEALTH:
        if any(name not in r.cumulative for m in members for r in by_member[m]):
            raise IngestError(
                f"predictor roster incomplete: policy data lacks {HEALTH_COLUMNS[name]!r}"
            )
        total = None
        for m in members:
            daily = _daily_from_cumulative([(r.date, r.cumulative[name]) for r in by_member[m]])
            s = weekly_sum(daily, m, name, start=p_start, end=p_end)
            total = s.values if total is None else total + s.values
        columns.append(WeeklySeries(region, name, WeekIndex.from_date(p_start), total))

    for name in INDICATORS + INDICES:
        per_member = {}
        for m in members:
            recs = by_member[m]
            src = "indicators" if name in INDICATOR_RANGES else "indices"
            per_member[m] = weekly_mean(
                [(r.date, getattr(r, src)[name]) for r in recs], m, name, start=p_start, end=p_end
            )
        columns.append(pop_weighted_aggregate(per_member, pops, region, name))

    trend_recs = [r for r in trends if r.region in member_set]
    if not trend_recs:
        raise IngestError(f"no search-trend rows for region {region!r}")
    t_start = min(WeekIndex.from_start(r.week_start) for r in trend_recs)
    t_end = max(WeekIndex.from_start(r.week_start) for r in trend_recs)
    groups_by_member = {
        m: build_trends_groups(trend_recs, grouping_map, m, t_start, t_end) for m in members
    }
    for col in TREND_COLUMNS:
        columns.append(
            pop_weighted_aggregate({m: groups_by_member[m][col] for m in members}, pops, region, col)
        )

    frame = align(columns, target=target)
    if first_protest > frame.first_week:
        frame = frame.window(first_protest, frame.last_week)
    check_roster(frame)
    return RegionDataset(region, frame, n_events)


def check_roster(frame: FeatureFrame) -> None:
    names = set(frame.names)
    if names != set(PREDICTORS):
        missing = sorted(set(PREDICTORS) - names)
        extra = sorted(names - set(PREDICTORS))
        raise IngestError(f"predictor roster mismatch: missing {missing}, unexpected {extra}")


def write_dataset_csv(dataset: RegionDataset, path: str | Path) -> None:
    frame = dataset.frame
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["week_start", TARGET, *PREDICTORS])
        for k, week in enumerate(frame.weeks()):
            w.writerow(
                [str(week), repr(float(frame.target[k]))]
                + [repr(float(frame.predictors[p][k])) for p in PREDICTORS]
            )


def read_dataset_csv(path: str | Path, region: str) -> RegionDataset:
    fh, reader = _reader(path, ("week_start", TARGET) + PREDICTORS)
    weeks: list[WeekIndex] = []
    target: list[float] = []
    cols: dict[str, list[float]] = {p: [] for p in PREDICTORS}
    with fh:
        for row in reader:
            line = reader.line_num
            weeks.append(WeekIndex.from_start(_parse_date(row["week_start"], path, line, "week_start")))
            target.append(float(row[TARGET]))
            for p in PREDICTORS:
                cols[p].append(float(row[p]))
    if not weeks:
        raise IngestError("dataset file has no rows", path)
    if any(b - a != 1 for a, b in zip(weeks, weeks[1:])):
        raise IngestError("dataset weeks are not contiguous", path)
    frame = FeatureFrame(
        region, weeks[0], np.asarray(target), {p: np.asarray(cols[p]) for p in PREDICTORS}, TARGET
    )
    return RegionDataset(region, frame, int(sum(target)))

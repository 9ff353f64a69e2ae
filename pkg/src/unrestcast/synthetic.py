"""Synthetic raw-data bundles with a planted lagged signal.

The bundle has the same five CSV files as a real run plus a ``config.yaml``,
so it exercises the full ingest -> explore -> forecast -> report path.  One
index column (``BundleSpec.planted``, stringency by default) drives protest counts ``lag`` weeks later through
``round(exp(a + b * x / 100) + noise)``; every other predictor is
independent noise.
"""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .ingest import INDICATOR_RANGES, INDICES, TREND_GROUPS
from .timeseries import WeekIndex

GROUP_TERMS = {g: (f"{g} term a", f"{g} term b") for g in TREND_GROUPS}


@dataclass
class SyntheticRegion:
    name: str
    subregions: dict[str, float]  # subregion -> population
    first_protest_week: int = 0  # weeks after the bundle start


@dataclass
class BundleSpec:
    regions: list[SyntheticRegion] = field(
        default_factory=lambda: [
            SyntheticRegion("DNK", {"DNK": 5.8e6}),
            SyntheticRegion("MW", {"IL": 12.7e6, "OH": 11.8e6}, first_protest_week=3),
        ]
    )
    start: dt.date = dt.date(2020, 1, 5)
    end: dt.date = dt.date(2021, 6, 26)
    planted: str = "stringency"
    lag: int = 2
    intercept: float = 0.5
    slope: float = 2.5
    noise_sd: float = 0.3
    seed: int = 0
    initial_train_end: dt.date = dt.date(2020, 10, 31)
    test_end: dt.date = dt.date(2021, 6, 26)
    horizons: tuple[int, ...] = (1, 2, 3)
    models: tuple[str, ...] = ("glm", "random_forest")
    outcomes: tuple[str, ...] = ("binary", "count")
    n_trees: int = 500


def _weeks(spec: BundleSpec) -> list[WeekIndex]:
    first = WeekIndex.from_date(spec.start)
    last = WeekIndex.from_date(spec.end)
    return [first + k for k in range(last - first + 1)]


def planted_counts(x: np.ndarray, spec: BundleSpec, rng: np.random.Generator) -> np.ndarray:
    """Counts for weeks lag.. driven by x at week t - lag; earlier weeks get baseline noise."""
    n = len(x)
    y = np.zeros(n)
    mean = np.exp(spec.intercept + spec.slope * x[: n - spec.lag] / 100.0)
    y[spec.lag :] = np.round(mean + rng.normal(0.0, spec.noise_sd, n - spec.lag))
    y[: spec.lag] = np.round(np.exp(spec.intercept + spec.slope * 0.5))
    return np.maximum(y, 0.0)


def write_bundle(directory: str | Path, spec: BundleSpec | None = None) -> Path:
    """Write the raw CSVs and a config; returns the config path."""
    spec = spec or BundleSpec()
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    weeks = _weeks(spec)
    n = len(weeks)

    planted_x = rng.uniform(0.0, 100.0, n)
    event_rows, policy_rows, trend_rows, region_rows = [], [], [], []
    for region in spec.regions:
        counts = planted_counts(planted_x, spec, rng)
        counts[: region.first_protest_week] = 0.0
        subs = sorted(region.subregions)
        for s in subs:
            region_rows.append((s, region.name, repr(region.subregions[s])))
        for k, week in enumerate(weeks):
            # Split each week's events across subregions; every event gets a
            # covid-tagged description, plus one unrelated event to filter out.
            share = rng.multinomial(int(counts[k]), [1 / len(subs)] * len(subs))
            for s, c in zip(subs, share):
                for e in range(int(c)):
                    day = week.start_date + dt.timedelta(days=int(rng.integers(0, 7)))
                    desc = ("Protest against COVID-19 restrictions", "Rally over coronavirus lockdown")[e % 2]
                    event_rows.append((day.isoformat(), s, "Protests", desc))
            day = week.start_date + dt.timedelta(days=int(rng.integers(0, 7)))
            event_rows.append((day.isoformat(), subs[0], "Protests", "march over climate policy"))

        for s in subs:
            weekly_ind = {c: rng.integers(0, top + 1, n) for c, top in INDICATOR_RANGES.items()}
            weekly_idx = {c: np.round(rng.uniform(0, 100, n), 2) for c in INDICES}
            weekly_idx[spec.planted] = np.round(planted_x, 2) if spec.planted in INDICES else weekly_idx[spec.planted]
            cum_cases = cum_deaths = 0
            for k, week in enumerate(weeks):
                for d in range(7):
                    day = week.start_date + dt.timedelta(days=d)
                    cum_cases += int(rng.poisson(200))
                    cum_deaths += int(rng.poisson(3))
                    policy_rows.append(
                        [day.isoformat(), s]
                        + [str(int(weekly_ind[c][k])) for c in INDICATOR_RANGES]
                        + [repr(float(weekly_idx[c][k])) for c in INDICES]
                        + [str(cum_cases), str(cum_deaths)]
                    )
            for g, terms in GROUP_TERMS.items():
                for term in terms:
                    vols = rng.integers(0, 101, n)
                    for k, week in enumerate(weeks):
                        trend_rows.append((week.start_date.isoformat(), s, term, str(int(vols[k]))))

    def write(name, header, rows):
        with (out / name).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

    event_rows.sort()
    write("events.csv", ["date", "region", "event_type", "description"], event_rows)
    write(
        "policy.csv",
        ["date", "region", *INDICATOR_RANGES, *INDICES, "confirmed_cases", "confirmed_deaths"],
        policy_rows,
    )
    write("trends.csv", ["week_start", "region", "term", "volume"], trend_rows)
    write("groupings.csv", ["term", "group"], [(t, g) for g, ts in GROUP_TERMS.items() for t in ts])
    write("regions.csv", ["subregion", "region", "population"], region_rows)

    config = {
        "data": {k: f"{k}.csv" for k in ("events", "policy", "trends", "groupings", "regions")},
        "study": {"start": spec.start.isoformat(), "end": spec.end.isoformat()},
        "initial_train_end": spec.initial_train_end.isoformat(),
        "test_end": spec.test_end.isoformat(),
        "horizons": list(spec.horizons),
        "outcomes": list(spec.outcomes),
        "models": list(spec.models),
        "seed": spec.seed,
        "n_trees": spec.n_trees,
        "output": "out",
    }
    cfg_path = out / "config.yaml"
    cfg_path.write_text(yaml.safe_dump(config, sort_keys=False), encoding="utf-8")
    return cfg_path

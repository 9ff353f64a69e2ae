"""Command-line pipeline: ingest, explore, forecast, report.

Exit codes: 0 success, 1 some plans failed, 2 input or configuration error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import datetime as dt
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import yaml

from . import __version__
from .evaluation import EvaluationError, build_report
from .harness import HORIZONS, MODELS, OUTCOMES, ExperimentPlan, PlanError, rolling_forecast
from .inference import SingularDesignError, granger_test
from .ingest import (
    IngestError,
    build_region_dataset,
    parse_events,
    parse_groupings,
    parse_policy,
    parse_regions,
    parse_trends,
    read_dataset_csv,
    write_dataset_csv,
)
from .outputs import (
    GRANGER_COLUMNS,
    GRANGER_VIEW_COLUMNS,
    _writer,
    fmt,
    read_forecasts,
    write_forecasts,
    write_json,
    write_metrics,
    write_selection,
)
from .timeseries import SeriesError

logger = logging.getLogger("unrestcast")

EXIT_OK, EXIT_PARTIAL, EXIT_INPUT = 0, 1, 2
OUT_ENV = "UNRESTCAST_OUT"
DATA_KEYS = ("events", "policy", "trends", "groupings", "regions")
EXPLORE_LAGS = (1, 2, 3, 4)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    data: dict[str, Path]
    initial_train_end: dt.date
    test_end: dt.date
    output: Path
    regions: list[str] = field(default_factory=list)
    horizons: list[int] = field(default_factory=lambda: list(HORIZONS))
    outcomes: list[str] = field(default_factory=lambda: list(OUTCOMES))
    models: list[str] = field(default_factory=lambda: ["glm", "random_forest"])
    study_start: dt.date | None = None
    study_end: dt.date | None = None
    test_end_by_region: dict[str, dt.date] = field(default_factory=dict)
    seed: int = 0
    n_trees: int = 500
    round_counts: bool = False
    rf_binary_mode: str = "classification"
    svg: bool = False
    workers: int = 1

    def validate(self) -> None:
        if not self.horizons:
            raise ConfigError("horizons must not be empty")
        bad = [h for h in self.horizons if h not in HORIZONS]
        if bad:
            raise ConfigError(f"horizons must be within {HORIZONS}, got {bad}")
        for o in self.outcomes:
            if o not in OUTCOMES:
                raise ConfigError(f"unknown outcome {o!r}")
        for m in self.models:
            if m not in MODELS:
                raise ConfigError(f"unknown model {m!r}")
        if self.test_end <= self.initial_train_end:
            raise ConfigError("test_end must come after initial_train_end")
        for r, d in self.test_end_by_region.items():
            if d <= self.initial_train_end:
                raise ConfigError(f"test_end for {r} must come after initial_train_end")
        if self.study_start and self.study_end and self.study_end < self.study_start:
            raise ConfigError("study_end precedes study_start")
        if self.rf_binary_mode not in ("classification", "regression"):
            raise ConfigError(f"unknown rf_binary_mode {self.rf_binary_mode!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def test_end_for(self, region: str) -> dt.date:
        return self.test_end_by_region.get(region, self.test_end)

    def knobs(self) -> dict:
        d = asdict(self)
        d["data"] = {k: str(v) for k, v in self.data.items()}
        d["output"] = str(self.output)
        d.pop("workers")
        return d


def _date(value, key: str) -> dt.date:
    if isinstance(value, dt.date):
        return value
    try:
        return dt.date.fromisoformat(str(value))
    except ValueError:
        raise ConfigError(f"{key}: not an ISO date: {value!r}") from None


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def load_config(path: str | Path, overrides: argparse.Namespace | None = None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    base = path.parent
    data_raw = raw.get("data") or {}
    missing = [k for k in DATA_KEYS if k not in data_raw]
    if missing:
        raise ConfigError(f"config lacks data paths for {missing}")
    data = {k: (base / str(data_raw[k])) for k in DATA_KEYS}
    study = raw.get("study") or {}
    flags = raw.get("flags") or {}
    for key in ("initial_train_end", "test_end"):
        if key not in raw:
            raise ConfigError(f"config lacks {key}")
    cfg = RunConfig(
        data=data,
        initial_train_end=_date(raw["initial_train_end"], "initial_train_end"),
        test_end=_date(raw["test_end"], "test_end"),
        output=base / str(raw.get("output", "out")),
        regions=[str(r) for r in raw.get("regions") or []],
        horizons=[int(h) for h in raw.get("horizons", HORIZONS)],
        outcomes=[str(o) for o in raw.get("outcomes", OUTCOMES)],
        models=[str(m) for m in raw.get("models", ("glm", "random_forest"))],
        study_start=_date(study["start"], "study.start") if "start" in study else None,
        study_end=_date(study["end"], "study.end") if "end" in study else None,
        test_end_by_region={
            str(k): _date(v, f"test_end_by_region.{k}") for k, v in (raw.get("test_end_by_region") or {}).items()
        },
        seed=int(raw.get("seed", 0)),
        n_trees=int(raw.get("n_trees", 500)),
        round_counts=bool(flags.get("round_counts", False)),
        rf_binary_mode=str(flags.get("rf_binary_mode", "classification")),
        svg=bool(flags.get("svg", False)),
        workers=int(raw.get("workers", 1)),
    )
    if os.environ.get(OUT_ENV):
        cfg.output = Path(os.environ[OUT_ENV])
    if overrides is not None:
        if getattr(overrides, "seed", None) is not None:
            cfg.seed = overrides.seed
        if getattr(overrides, "regions", None):
            cfg.regions = _csv_list(overrides.regions)
        if getattr(overrides, "horizons", None):
            try:
                cfg.horizons = [int(h) for h in _csv_list(overrides.horizons)]
            except ValueError:
                raise ConfigError(f"--horizons: not integers: {overrides.horizons!r}") from None
        if getattr(overrides, "svg", False):
            cfg.svg = True
        if getattr(overrides, "round_counts", False):
            cfg.round_counts = True
    cfg.validate()
    return cfg


def _datasets_dir(cfg: RunConfig) -> Path:
    return cfg.output / "datasets"


def cmd_ingest(cfg: RunConfig) -> int:
    window = (cfg.study_start, cfg.study_end) if cfg.study_start and cfg.study_end else None
    for key in DATA_KEYS:
        if not cfg.data[key].exists():
            raise IngestError("file not found", cfg.data[key])
    regions_cfg = parse_regions(cfg.data["regions"])
    groupings = parse_groupings(cfg.data["groupings"])
    events = parse_events(cfg.data["events"], window)
    policy = parse_policy(cfg.data["policy"])
    trends = parse_trends(cfg.data["trends"])
    regions = cfg.regions or regions_cfg.regions
    unknown = [r for r in regions if r not in regions_cfg.regions]
    if unknown:
        raise IngestError(f"regions not in the regions file: {unknown}", cfg.data["regions"])

    out = _datasets_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"events_dropped_outside_window": events.dropped, "regions": {}}
    for region in regions:
        ds = build_region_dataset(events, policy, trends, groupings, regions_cfg, region, window)
        write_dataset_csv(ds, out / f"{region}.csv")
        manifest["regions"][region] = {
            "file": f"{region}.csv",
            "rows": len(ds.frame),
            "first_week": str(ds.frame.first_week),
            "last_week": str(ds.frame.last_week),
            "covid_events": ds.n_events,
            "predictors": len(ds.frame.names),
        }
        logger.info("ingested %s: %d weeks", region, len(ds.frame))
    write_json(manifest, out / "manifest.json")
    return EXIT_OK


def _load_datasets(cfg: RunConfig) -> dict:
    d = _datasets_dir(cfg)
    manifest = d / "manifest.json"
    if not manifest.exists():
        raise IngestError("no ingested datasets; run `ingest` first", manifest)
    listed = json.loads(manifest.read_text(encoding="utf-8"))["regions"]
    regions = cfg.regions or sorted(listed)
    missing = [r for r in regions if r not in listed]
    if missing:
        raise IngestError(f"regions not ingested: {missing}", manifest)
    return {r: read_dataset_csv(d / listed[r]["file"], r) for r in regions}


def cmd_explore(cfg: RunConfig) -> int:
    """Full-period Granger tests for every predictor at lags 1-4."""
    datasets = _load_datasets(cfg)
    cfg.output.mkdir(parents=True, exist_ok=True)
    fh, w = _writer(cfg.output / "granger.csv", GRANGER_COLUMNS)
    vh, v = _writer(cfg.output / "granger_significant.csv", GRANGER_VIEW_COLUMNS)
    with fh, vh:
        for region, ds in datasets.items():
            frame = ds.frame
            for name in sorted(frame.names):
                best: tuple[float, int] | None = None
                for lag in EXPLORE_LAGS:
                    try:
                        res = granger_test(frame.target, frame.predictors[name], lag)
                    except (SingularDesignError, ValueError) as exc:
                        logger.info("%s %s lag %d degenerate: %s", region, name, lag, exc)
                        w.writerow([region, name, lag, "NA", "NA", "NA", "NA", "degenerate"])
                        continue
                    status = "perfect_fit" if res.degenerate else "ok"
                    w.writerow([region, name, lag, fmt(res.f_stat), fmt(res.p_value), res.df1, res.df2, status])
                    if best is None or res.p_value < best[0]:
                        best = (res.p_value, lag)
                if best is not None:
                    v.writerow([region, name, best[1], fmt(best[0]), int(best[0] < 0.05)])
    return EXIT_OK


def build_plans(cfg: RunConfig, regions: Sequence[str]) -> list[ExperimentPlan]:
    models = [m for m in MODELS if m in cfg.models or m == "naive"]
    return [
        ExperimentPlan(
            region, h, outcome, model, cfg.initial_train_end, cfg.test_end_for(region),
            cfg.seed, cfg.n_trees, cfg.rf_binary_mode, cfg.round_counts,
        )
        for region in regions
        for h in sorted(cfg.horizons)
        for outcome in OUTCOMES if outcome in cfg.outcomes
        for model in models
    ]


def _run_plan(args):
    dataset, plan = args
    return rolling_forecast(dataset, plan)


def cmd_forecast(cfg: RunConfig) -> int:
    datasets = _load_datasets(cfg)
    plans = build_plans(cfg, list(datasets))
    jobs = [(datasets[p.region], p) for p in plans]
    tracks, failures = [], []
    if cfg.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(cfg.workers) as pool:
            futures = [pool.submit(_run_plan, job) for job in jobs]
            results = []
            for fut in futures:
                try:
                    results.append(fut.result())
                except Exception as exc:  # per-plan isolation
                    results.append(exc)
    else:
        results = []
        for job in jobs:
            try:
                results.append(_run_plan(job))
            except Exception as exc:  # per-plan isolation
                results.append(exc)
    for plan, res in zip(plans, results):
        if isinstance(res, Exception):
            logger.error("plan %s failed: %s", plan.key, res)
            failures.append({"plan": list(plan.key), "error": str(res)})
        else:
            tracks.append(res)
    cfg.output.mkdir(parents=True, exist_ok=True)
    write_forecasts(tracks, cfg.output / "forecasts.csv")
    write_selection(tracks, cfg.output / "selection.csv")
    write_json(
        {
            "version": __version__,
            "config": cfg.knobs(),
            "decisions": {
                "binary_threshold": "third quartile (type 7) of the full-period counts; strict >",
                "thresholds": {
                    t.plan.region: t.threshold for t in tracks if t.threshold is not None
                },
                "glm_class_cutoff": 0.5,
                "granger_selection_target": "weekly counts on the training window",
                "mase_scale": "mean |Y_t - Y_{t-i}| over the test weeks",
                "week_anchor": "Sunday, epoch 2020-01-05",
                "irls": {"tol": 1e-8, "max_iter": 25, "eta_clamp": 30.0},
                "forest": {"n_trees": cfg.n_trees, "min_node": {"classification": 1, "regression": 5}},
            },
            "failures": failures,
            "summary": {"plans": len(plans), "succeeded": len(tracks), "failed": len(failures)},
        },
        cfg.output / "run_metadata.json",
    )
    if failures:
        for f in failures:
            print(f"failed: {'/'.join(map(str, f['plan']))}: {f['error']}", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    path = cfg.output / "forecasts.csv"
    if not path.exists():
        raise IngestError("no forecasts; run `forecast` first", path)
    tracks = read_forecasts(path)
    rows = build_report(tracks)
    write_metrics(rows, cfg.output / "metrics.csv")
    if cfg.svg:
        from .plots import write_count_charts

        write_count_charts(tracks, cfg.output / "plots")
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "explore": cmd_explore, "forecast": cmd_forecast, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unrestcast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--regions", default=None, help="comma-separated region ids")
        p.add_argument("--horizons", default=None, help="comma-separated subset of 1,2,3")
        p.add_argument("--svg", action="store_true", help="emit SVG line charts (report)")
        p.add_argument("--round-counts", action="store_true", dest="round_counts")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args.config, args)
        return COMMANDS[args.command](cfg)
    except (ConfigError, IngestError, SeriesError, PlanError, EvaluationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

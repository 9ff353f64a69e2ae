import csv
import datetime as dt
import json
import shutil

import pytest
import yaml

from unrestcast.cli import main
from unrestcast.synthetic import BundleSpec, write_bundle

SPEC = BundleSpec(test_end=dt.date(2020, 12, 26), horizons=(1,), n_trees=40)


def rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def ingested(tmp_path_factory):
    cfg = write_bundle(tmp_path_factory.mktemp("bundle"), SPEC)
    assert main(["ingest", "--config", str(cfg)]) == 0
    return cfg


@pytest.fixture(scope="module")
def forecasted(ingested):
    assert main(["forecast", "--config", str(ingested)]) == 0
    return ingested


def test_ingest_writes_region_files_and_manifest(ingested):
    d = ingested.parent / "out" / "datasets"
    assert sorted(p.name for p in d.iterdir()) == ["DNK.csv", "MW.csv", "manifest.json"]
    manifest = json.loads((d / "manifest.json").read_text())
    assert set(manifest["regions"]) == {"DNK", "MW"}
    assert all(r["predictors"] == 29 for r in manifest["regions"].values())
    header = (d / "DNK.csv").read_text().splitlines()[0].split(",")
    assert len(header) == 31


def test_ingest_rerun_identical_bytes(ingested, tmp_path):
    d = ingested.parent / "out" / "datasets"
    before = {p.name: p.read_bytes() for p in d.iterdir()}
    assert main(["ingest", "--config", str(ingested)]) == 0
    assert {p.name: p.read_bytes() for p in d.iterdir()} == before


def test_missing_regions_file_exit_2(tmp_path, capsys):
    cfg = write_bundle(tmp_path, SPEC)
    (tmp_path / "regions.csv").unlink()
    assert main(["ingest", "--config", str(cfg)]) == 2
    assert "regions.csv" in capsys.readouterr().err


def test_bad_row_reports_line(tmp_path, capsys):
    cfg = write_bundle(tmp_path, SPEC)
    ev = tmp_path / "events.csv"
    lines = ev.read_text().splitlines()
    lines[4] = "2020-13-01,DNK,Protests,covid rally"
    ev.write_text("\n".join(lines) + "\n")
    assert main(["ingest", "--config", str(cfg)]) == 2
    assert "events.csv:5" in capsys.readouterr().err


def test_explore_tables(ingested):
    assert main(["explore", "--config", str(ingested)]) == 0
    out = ingested.parent / "out"
    table = rows(out / "granger.csv")
    assert len(table) == 29 * 4 * 2
    view = {(r["region"], r["predictor"]): r for r in rows(out / "granger_significant.csv")}
    for region in ("DNK", "MW"):
        assert view[(region, "stringency")]["min_p_lag"] == "2"
        assert view[(region, "stringency")]["significant"] == "1"


def test_explore_flags_constant_predictor(tmp_path):
    cfg = write_bundle(tmp_path, SPEC)
    pol = tmp_path / "policy.csv"
    data = list(csv.reader(pol.open()))
    col = data[0].index("C8")
    for r in data[1:]:
        r[col] = "2"
    with pol.open("w", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(data)
    assert main(["ingest", "--config", str(cfg), "--regions", "DNK"]) == 0
    assert main(["explore", "--config", str(cfg)]) == 0
    flagged = [r for r in rows(tmp_path / "out" / "granger.csv") if r["predictor"] == "C8"]
    assert len(flagged) == 4 and all(r["status"] == "degenerate" and r["p_value"] == "NA" for r in flagged)


def test_forecast_row_counts(forecasted):
    out = forecasted.parent / "out"
    fc = rows(out / "forecasts.csv")
    assert list(fc[0]) == [
        "region", "horizon", "outcome", "model", "week_start",
        "y_true", "y_pred", "window_index", "fallback_flag",
    ]
    groups = {}
    for r in fc:
        key = (r["region"], r["outcome"], r["model"])
        groups[key] = groups.get(key, 0) + 1
    assert len(groups) == 2 * 2 * 3 and set(groups.values()) == {8}
    sel = rows(out / "selection.csv")
    assert list(sel[0])[:4] == ["region", "horizon", "window_index", "selected_features"]
    meta = json.loads((out / "run_metadata.json").read_text())
    assert meta["summary"] == {"plans": 12, "succeeded": 12, "failed": 0}


def test_seed_changes_forest_rows_only(forecasted, tmp_path, monkeypatch):
    monkeypatch.setenv("UNRESTCAST_OUT", str(tmp_path / "other"))
    shutil.copytree(forecasted.parent / "out" / "datasets", tmp_path / "other" / "datasets")
    assert main(["forecast", "--config", str(forecasted), "--seed", "7"]) == 0
    a = rows(forecasted.parent / "out" / "forecasts.csv")
    b = rows(tmp_path / "other" / "forecasts.csv")
    by_model = lambda rs, m: [r for r in rs if r["model"] == m]
    assert by_model(a, "naive") == by_model(b, "naive")
    assert by_model(a, "glm") == by_model(b, "glm")
    rf_a = [r["y_pred"] for r in by_model(a, "random_forest") if r["outcome"] == "count"]
    rf_b = [r["y_pred"] for r in by_model(b, "random_forest") if r["outcome"] == "count"]
    assert rf_a != rf_b


def test_forecast_rerun_identical(forecasted, tmp_path, monkeypatch):
    monkeypatch.setenv("UNRESTCAST_OUT", str(tmp_path / "again"))
    shutil.copytree(forecasted.parent / "out" / "datasets", tmp_path / "again" / "datasets")
    assert main(["forecast", "--config", str(forecasted)]) == 0
    original = (forecasted.parent / "out" / "forecasts.csv").read_bytes()
    assert (tmp_path / "again" / "forecasts.csv").read_bytes() == original


def test_report_rows_and_svg(forecasted):
    out = forecasted.parent / "out"
    shutil.rmtree(out / "plots", ignore_errors=True)
    assert main(["report", "--config", str(forecasted)]) == 0
    assert not (out / "plots").exists()
    metrics = rows(out / "metrics.csv")
    binary = [r for r in metrics if r["outcome"] == "binary"]
    count = [r for r in metrics if r["outcome"] == "count"]
    assert {r["metric"] for r in binary} == {"tpr", "tnr", "bac"}
    assert {r["metric"] for r in count} == {"r2_s0", "r2_s1", "r2_s2", "mase"}
    assert len(binary) == 2 * 3 * 3 and len(count) == 2 * 3 * 4
    assert {r["model"] for r in metrics} == {"glm", "random_forest", "naive"}
    assert main(["report", "--config", str(forecasted), "--svg"]) == 0
    svgs = sorted(p.name for p in (out / "plots").iterdir())
    assert svgs and all(n.endswith(".svg") for n in svgs)


def test_report_without_naive_fails(forecasted, tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("UNRESTCAST_OUT", str(tmp_path))
    src = rows(forecasted.parent / "out" / "forecasts.csv")
    with (tmp_path / "forecasts.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(src[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(r for r in src if r["model"] != "naive")
    assert main(["report", "--config", str(forecasted)]) == 2
    assert "naive" in capsys.readouterr().err


def test_config_errors(tmp_path, capsys):
    cfg = write_bundle(tmp_path, SPEC)
    assert main(["ingest", "--config", str(tmp_path / "nope.yaml")]) == 2
    raw = yaml.safe_load(cfg.read_text())
    raw["horizons"] = [4]
    cfg.write_text(yaml.safe_dump(raw))
    assert main(["forecast", "--config", str(cfg)]) == 2
    assert "horizons" in capsys.readouterr().err

import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unrestcast.ingest import (
    INDICATOR_RANGES,
    INDICES,
    PREDICTORS,
    TREND_GROUPS,
    EventRecord,
    IngestError,
    PolicyRecord,
    RegionConfig,
    TrendsRecord,
    build_region_dataset,
    build_trends_groups,
    filter_covid,
    parse_events,
    parse_groupings,
    parse_policy,
    parse_regions,
    parse_trends,
    read_dataset_csv,
    write_dataset_csv,
)
from unrestcast.timeseries import WeekIndex

START = dt.date(2020, 1, 5)
GROUPING = {f"{g} t": g for g in TREND_GROUPS}


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


# --- parsing ---------------------------------------------------------------


def test_parse_events_well_formed(tmp_path):
    p = write(tmp_path, "e.csv", "date,region,event_type,description\n"
              "2020-03-01,DNK,Protests,a\n2020-03-02,DNK,Protests,b\n2020-03-03,DNK,Riots,c\n")
    recs = parse_events(p)
    assert len(recs) == 3
    assert recs[0] == EventRecord(dt.date(2020, 3, 1), "DNK", "Protests", "a")


def test_parse_events_bad_date_reports_line(tmp_path):
    p = write(tmp_path, "e.csv", "date,region,event_type,description\n"
              "2020-03-01,DNK,Protests,a\n2020-13-01,DNK,Protests,b\n")
    with pytest.raises(IngestError) as info:
        parse_events(p)
    assert info.value.line == 3
    assert "e.csv:3" in str(info.value)


def test_parse_events_header_only(tmp_path):
    p = write(tmp_path, "e.csv", "date,region,event_type,description\n")
    assert parse_events(p) == []


def test_parse_events_window_counts_dropped(tmp_path):
    p = write(tmp_path, "e.csv", "date,region,event_type,description\n"
              "2019-12-01,DNK,Protests,a\n2020-03-02,DNK,Protests,b\n2022-01-01,DNK,Protests,c\n")
    recs = parse_events(p, (START, dt.date(2021, 6, 30)))
    assert len(recs) == 1 and recs.dropped == 2


def test_parse_events_missing_column(tmp_path):
    p = write(tmp_path, "e.csv", "date,region,description\n2020-03-01,DNK,a\n")
    with pytest.raises(IngestError, match="missing columns"):
        parse_events(p)


@pytest.mark.parametrize(
    "desc, kept",
    [
        ("Protest against COVID-19 curfew", True),
        ("march over climate policy", False),
        ("anti-Coronavirus-measures rally", True),
    ],
)
def test_filter_covid(desc, kept):
    e = EventRecord(START, "X", "Protests", desc)
    assert (filter_covid([e]) == [e]) is kept


def _policy_header(extra=""):
    return ",".join(["date", "region", *INDICATOR_RANGES, *INDICES]) + extra + "\n"


def test_parse_policy_blank_is_zero_and_extra_columns_ignored(tmp_path):
    cells = [""] * len(INDICATOR_RANGES) + ["50"] * len(INDICES)
    p = write(tmp_path, "p.csv", _policy_header(",E3,V1") + ",".join(["2020-03-01", "DNK", *cells, "1000", "2"]) + "\n")
    (rec,) = parse_policy(p)
    assert all(v == 0.0 for v in rec.indicators.values())
    assert rec.indices["stringency"] == 50.0
    assert rec.cumulative == {}


@pytest.mark.parametrize("col, value", [("C1", "4"), ("H8", "-1"), ("C2", "1.5"), ("stringency", "101")])
def test_parse_policy_range_checks(tmp_path, col, value):
    cols = [*INDICATOR_RANGES, *INDICES]
    cells = ["0"] * len(cols)
    cells[cols.index(col)] = value
    p = write(tmp_path, "p.csv", _policy_header() + ",".join(["2020-03-01", "DNK", *cells]) + "\n")
    with pytest.raises(IngestError, match=col) as info:
        parse_policy(p)
    assert info.value.line == 2


def test_parse_trends_checks(tmp_path):
    ok = write(tmp_path, "t.csv", "week_start,region,term,volume\n2020-01-05,DNK,mask t,40\n2020-01-12,DNK,mask t,\n")
    assert parse_trends(ok) == [TrendsRecord(START, "DNK", "mask t", 40.0)]
    bad = write(tmp_path, "t2.csv", "week_start,region,term,volume\n2020-01-06,DNK,mask t,40\n")
    with pytest.raises(IngestError, match="Sunday"):
        parse_trends(bad)
    big = write(tmp_path, "t3.csv", "week_start,region,term,volume\n2020-01-05,DNK,mask t,140\n")
    with pytest.raises(IngestError, match="outside"):
        parse_trends(big)


def test_parse_groupings_and_regions(tmp_path):
    g = write(tmp_path, "g.csv", "term,group\nface mask,mask\nschool closed,school\n")
    assert parse_groupings(g) == {"face mask": "mask", "school closed": "school"}
    bad = write(tmp_path, "g2.csv", "term,group\nx,sports\n")
    with pytest.raises(IngestError, match="sports"):
        parse_groupings(bad)
    r = write(tmp_path, "r.csv", "subregion,region,population\nIL,MW,12.7e6\nOH,MW,11.8e6\nDNK,DNK,5.8e6\n")
    cfg = parse_regions(r)
    assert cfg.members("MW") == ["IL", "OH"] and cfg.regions == ["DNK", "MW"]
    dup = write(tmp_path, "r2.csv", "subregion,region,population\nIL,MW,1\nIL,MW,2\n")
    with pytest.raises(IngestError, match="twice") as info:
        parse_regions(dup)
    assert info.value.line == 3


# --- trends groups ---------------------------------------------------------


def test_trends_group_mean_of_present_terms():
    grouping = {"a": "mask", "b": "mask", "c": "mask", "d": "mask", "e": "mask"}
    recs = [
        TrendsRecord(START, "X", "a", 10.0),
        TrendsRecord(START, "X", "b", 30.0),
        TrendsRecord(START + dt.timedelta(7), "X", "c", 42.0),
    ]
    groups = build_trends_groups(recs, grouping, "X")
    assert groups["trends_mask"].values.tolist() == [20.0, 42.0]
    assert len(groups) == 7
    assert groups["trends_covid"].values.tolist() == [0.0, 0.0]


def test_trends_unknown_term():
    recs = [TrendsRecord(START, "X", "quarantini", 5.0)]
    with pytest.raises(IngestError, match="quarantini"):
        build_trends_groups(recs, GROUPING, "X")


# --- dataset assembly ------------------------------------------------------


def _policy(sub, n_days, indicator=0.0, index=50.0, cases_per_day=10):
    recs = []
    for d in range(n_days):
        ind = {c: 0.0 for c in INDICATOR_RANGES}
        ind["C1"] = indicator
        idx = {c: index for c in INDICES}
        cum = {"cases": float(cases_per_day * (d + 1)), "deaths": float(d + 1)}
        recs.append(PolicyRecord(START + dt.timedelta(d), sub, ind, idx, cum))
    return recs


def _trends(sub, n_weeks, volume=30.0):
    return [
        TrendsRecord(START + dt.timedelta(7 * k), sub, term, volume)
        for k in range(n_weeks)
        for term in GROUPING
    ]


def _events(sub, per_week, tag="covid rally"):
    out = []
    for k, c in enumerate(per_week):
        for e in range(c):
            out.append(EventRecord(START + dt.timedelta(7 * k + e % 7), sub, "Protests", tag))
    return out


def test_single_country_pass_through():
    weeks = 8
    events = _events("DNK", [1, 2, 0, 3, 1, 0, 2, 1]) + _events("DNK", [1] * 8, "climate march")
    cfg = RegionConfig({"DNK": "DNK"}, {"DNK": 5.8e6})
    ds = build_region_dataset(events, _policy("DNK", 7 * weeks, 2.0), _trends("DNK", weeks), GROUPING, cfg, "DNK")
    assert ds.frame.names == sorted(PREDICTORS) and len(PREDICTORS) == 29
    assert ds.target.values.tolist() == [1, 2, 0, 3, 1, 0, 2, 1]
    assert ds.frame.column("C1").values.tolist() == [2.0] * weeks
    assert ds.frame.column("cases").values.tolist() == [70.0] * weeks
    assert ds.frame.column("trends_mask").values.tolist() == [30.0] * weeks


def test_two_state_weighted_policy():
    weeks = 4
    events = _events("A", [1, 1, 1, 1]) + _events("B", [2, 0, 1, 0])
    policy = _policy("A", 7 * weeks, 4.0) + _policy("B", 7 * weeks, 8.0)
    trends = _trends("A", weeks, 10.0) + _trends("B", weeks, 50.0)
    cfg = RegionConfig({"A": "R", "B": "R"}, {"A": 1.0, "B": 3.0})
    ds = build_region_dataset(events, policy, trends, GROUPING, cfg, "R")
    assert ds.frame.column("C1").values.tolist() == [7.0] * weeks
    assert ds.frame.column("trends_covid").values.tolist() == [40.0] * weeks
    assert ds.target.values.tolist() == [3, 1, 2, 1]
    assert ds.frame.column("cases").values.tolist() == [140.0] * weeks


def test_trimmed_to_first_protest_week():
    weeks = 14
    counts = [0] * 10 + [1, 2, 1, 1]
    cfg = RegionConfig({"DNK": "DNK"}, {"DNK": 1.0})
    ds = build_region_dataset(
        _events("DNK", counts), _policy("DNK", 7 * weeks), _trends("DNK", weeks), GROUPING, cfg, "DNK",
        event_window=(START, START + dt.timedelta(7 * weeks - 1)),
    )
    assert ds.frame.first_week == WeekIndex(10)
    assert ds.target.values.tolist() == [1, 2, 1, 1]


def test_missing_population():
    cfg = RegionConfig({"A": "R", "B": "R"}, {"A": 1.0})
    with pytest.raises(IngestError, match="population"):
        build_region_dataset(_events("A", [1]), _policy("A", 7), _trends("A", 1), GROUPING, cfg, "R")


def test_incomplete_roster_without_health_columns():
    policy = [PolicyRecord(r.date, r.region, r.indicators, r.indices, {}) for r in _policy("A", 7)]
    cfg = RegionConfig({"A": "A"}, {"A": 1.0})
    with pytest.raises(IngestError, match="roster"):
        build_region_dataset(_events("A", [1]), policy, _trends("A", 1), GROUPING, cfg, "A")


@settings(max_examples=30, deadline=None)
@given(
    st.lists(st.integers(0, 6), min_size=6, max_size=12),
    st.lists(st.integers(0, 6), min_size=6, max_size=12),
)
def test_rollup_preserves_event_totals(a_counts, b_counts):
    n = min(len(a_counts), len(b_counts))
    a_counts, b_counts = a_counts[:n], b_counts[:n]
    a_counts[0] += 1  # first week always has a protest, so nothing is trimmed
    events = _events("A", a_counts) + _events("B", b_counts) + _events("C", [3] * n)
    cfg = RegionConfig({"A": "R", "B": "R", "C": "Other"}, {"A": 2.0, "B": 5.0, "C": 1.0})
    ds = build_region_dataset(
        events, _policy("A", 7 * n) + _policy("B", 7 * n), _trends("A", n) + _trends("B", n), GROUPING, cfg, "R"
    )
    assert ds.target.values.sum() == sum(a_counts) + sum(b_counts)
    assert ds.n_events == sum(a_counts) + sum(b_counts)
    for name in INDICES + tuple(c for c in PREDICTORS if c.startswith("trends_")):
        v = ds.frame.column(name).values
        assert np.all((v >= 0) & (v <= 100))


def test_dataset_csv_round_trip(tmp_path):
    cfg = RegionConfig({"DNK": "DNK"}, {"DNK": 1.0})
    ds = build_region_dataset(_events("DNK", [1, 2, 3]), _policy("DNK", 21), _trends("DNK", 3), GROUPING, cfg, "DNK")
    path = tmp_path / "DNK.csv"
    write_dataset_csv(ds, path)
    back = read_dataset_csv(path, "DNK")
    assert back.frame.first_week == ds.frame.first_week
    assert back.target.values.tolist() == ds.target.values.tolist()
    for name in PREDICTORS:
        assert back.frame.column(name).values.tolist() == ds.frame.column(name).values.tolist()

import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from unrestcast.timeseries import (
    EPOCH,
    SeriesError,
    WeekIndex,
    WeeklySeries,
    align,
    lag,
    pop_weighted_aggregate,
    quantile,
    weekly_mean,
    weekly_sum,
)

D = dt.date


def test_week_index_anchor():
    assert EPOCH.weekday() == 6
    assert WeekIndex.from_date(D(2020, 1, 5)).ordinal == 0
    assert WeekIndex.from_date(D(2020, 1, 11)).ordinal == 0
    assert WeekIndex.from_date(D(2020, 1, 12)).ordinal == 1
    assert WeekIndex.from_date(D(2020, 1, 4)).ordinal == -1
    with pytest.raises(SeriesError):
        WeekIndex.from_start(D(2020, 1, 6))


@given(st.integers(-500, 500))
def test_week_index_bijective(k):
    w = WeekIndex(k)
    assert w.start_date.weekday() == 6
    assert WeekIndex.from_start(w.start_date) == w


def test_weekly_sum_constant_week():
    daily = {D(2020, 1, 5) + dt.timedelta(days=d): 1.0 for d in range(7)}
    s = weekly_sum(daily)
    assert s.first_week == WeekIndex(0)
    assert s.values.tolist() == [7.0]


def test_weekly_sum_hand_binning():
    s = weekly_sum([(D(2020, 1, 6), 1), (D(2020, 1, 6), 1), (D(2020, 1, 13), 1)])
    assert s.first_week.start_date == D(2020, 1, 5)
    assert s.values.tolist() == [2.0, 1.0]


def test_weekly_sum_empty_week_is_zero():
    s = weekly_sum([(D(2020, 1, 6), 3), (D(2020, 1, 21), 1)])
    assert s.values.tolist() == [3.0, 0.0, 1.0]


def test_weekly_sum_explicit_grid_pads_zeros():
    s = weekly_sum([(D(2020, 1, 13), 1)], start=D(2020, 1, 5), end=D(2020, 1, 25))
    assert s.values.tolist() == [0.0, 1.0, 0.0]


def test_weekly_sum_empty_input():
    with pytest.raises(SeriesError, match="empty series"):
        weekly_sum([])


@given(st.lists(st.tuples(st.integers(0, 200), st.integers(0, 50)), min_size=1, max_size=60))
def test_weekly_sum_preserves_total(items):
    daily = [(D(2020, 1, 1) + dt.timedelta(days=d), float(v)) for d, v in items]
    assert weekly_sum(daily).values.sum() == pytest.approx(sum(v for _, v in daily))


def test_weekly_mean_constant_and_mixed():
    week = [D(2020, 1, 5) + dt.timedelta(days=d) for d in range(7)]
    assert weekly_mean([(d, 2.0) for d in week]).values.tolist() == [2.0]
    mixed = [(d, 0.0 if k < 3 else 3.0) for k, d in enumerate(week)]
    assert weekly_mean(mixed).values[0] == pytest.approx(12 / 7, abs=1e-12)


def test_weekly_mean_missing_week_is_zero():
    s = weekly_mean([(D(2020, 1, 5), None), (D(2020, 1, 12), 4.0), (D(2020, 1, 13), float("nan"))])
    assert s.values.tolist() == [0.0, 4.0]
    s = weekly_mean([(D(2020, 1, 12), 4.0)], start=D(2020, 1, 5), end=D(2020, 1, 18))
    assert s.values.tolist() == [0.0, 4.0]


def _series(values, first=0, var="x", region="R"):
    return WeeklySeries(region, var, WeekIndex(first), np.asarray(values, dtype=float))


def test_pop_weighted_aggregate_examples():
    agg = pop_weighted_aggregate({"a": _series([4.0]), "b": _series([8.0])}, {"a": 1, "b": 3})
    assert agg.values.tolist() == [7.0]
    same = pop_weighted_aggregate({"a": _series([5.0, 2.0]), "b": _series([5.0, 2.0])}, {"a": 2, "b": 9})
    assert same.values == pytest.approx([5.0, 2.0])
    one = _series([1.0, 2.0, 3.0])
    assert pop_weighted_aggregate({"a": one}, {"a": 10}).values.tolist() == [1.0, 2.0, 3.0]


def test_pop_weighted_aggregate_errors():
    with pytest.raises(SeriesError):
        pop_weighted_aggregate({"a": _series([1.0]), "b": _series([1.0], first=1)}, {"a": 1, "b": 1})
    with pytest.raises(SeriesError):
        pop_weighted_aggregate({"a": _series([1.0])}, {"a": 0})
    with pytest.raises(SeriesError):
        pop_weighted_aggregate({"a": _series([1.0])}, {"a": -5})


@given(
    st.lists(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=4), min_size=1, max_size=5),
    st.lists(st.floats(0.1, 1e6), min_size=5, max_size=5),
)
def test_pop_weighted_aggregate_bounded(rows, pops):
    series = {f"s{k}": _series(r) for k, r in enumerate(rows)}
    agg = pop_weighted_aggregate(series, {f"s{k}": pops[k] for k in range(len(rows))})
    arr = np.array(rows)
    assert np.all(agg.values >= arr.min(axis=0) - 1e-9)
    assert np.all(agg.values <= arr.max(axis=0) + 1e-9)


def test_lag_examples():
    s = lag(_series([1, 2, 3]), 1)
    assert s.values.tolist() == [1.0, 2.0]
    assert s.first_week == WeekIndex(1)
    assert len(lag(_series(np.arange(80)), 4)) == 76
    with pytest.raises(SeriesError):
        lag(_series([1, 2, 3]), 3)
    with pytest.raises(SeriesError):
        lag(_series([1, 2, 3]), 0)


@given(st.lists(st.floats(-100, 100), min_size=6, max_size=30), st.integers(1, 3))
def test_lag_composes(values, k):
    s = _series(values)
    twice = lag(lag(s, 1), k)
    direct = lag(s, k + 1)
    assert twice.first_week == direct.first_week
    assert twice.values.tolist() == direct.values.tolist()


def test_quantile_examples():
    assert quantile(range(8), 0.75) == pytest.approx(5.25)
    assert quantile([3.0, 1.0, 2.0], 0) == 1.0
    assert quantile([3.0, 1.0, 2.0], 1) == 3.0
    assert quantile([4.0] * 9, 0.3) == 4.0
    with pytest.raises(SeriesError):
        quantile([], 0.5)
    with pytest.raises(SeriesError):
        quantile([1.0], 1.5)


@settings(max_examples=200)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=40), st.floats(0, 1))
def test_quantile_matches_numpy_type7(values, p):
    assert quantile(values, p) == pytest.approx(float(np.quantile(values, p)), rel=1e-9, abs=1e-6)


@given(
    st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30),
    st.floats(0, 1),
    st.floats(0, 1),
    st.floats(0.1, 10),
    st.floats(-100, 100),
)
def test_quantile_monotone_and_affine(values, p1, p2, a, b):
    lo, hi = sorted((p1, p2))
    assert quantile(values, lo) <= quantile(values, hi) + 1e-9
    scaled = [a * v + b for v in values]
    assert quantile(scaled, p1) == pytest.approx(a * quantile(values, p1) + b, rel=1e-9, abs=1e-6)


def test_align_intersection():
    a = _series(np.arange(10), first=1, var="a")
    b = _series(np.arange(10), first=3, var="b")
    f = align([b, a])
    assert f.first_week == WeekIndex(3) and f.last_week == WeekIndex(10)
    assert f.names == ["a", "b"]
    assert f.predictors["a"].tolist() == list(range(2, 10))


def test_align_identical_and_disjoint():
    a = _series([1, 2, 3], var="a")
    b = _series([4, 5, 6], var="b")
    f = align([a, b], target="a")
    assert len(f) == 3 and f.target.tolist() == [1, 2, 3] and f.names == ["b"]
    with pytest.raises(SeriesError):
        align([a, _series([1.0], first=10, var="c")])
    with pytest.raises(SeriesError):
        align([a, _series([1.0, 2.0], var="d", region="other")])

import datetime as dt

import numpy as np
import pytest

from unrestcast.ingest import PREDICTORS, TARGET, RegionDataset
from unrestcast.timeseries import FeatureFrame, WeekIndex


def planted_dataset(
    n_weeks=60,
    lag=2,
    planted="stringency",
    seed=0,
    first=WeekIndex(0),
    region="SYN",
    noise_sd=0.3,
):
    """In-memory region whose counts follow exp(0.5 + 2.5 x/100) of ``planted`` ``lag`` weeks back."""
    rng = np.random.default_rng(seed)
    cols = {name: rng.uniform(0, 100, n_weeks) for name in sorted(PREDICTORS)}
    x = cols[planted]
    y = np.full(n_weeks, 5.0)
    y[lag:] = np.maximum(np.round(np.exp(0.5 + 2.5 * x[:-lag] / 100) + rng.normal(0, noise_sd, n_weeks - lag)), 0)
    frame = FeatureFrame(region, first, y, cols, TARGET)
    return RegionDataset(region, frame, int(y.sum()))


@pytest.fixture
def dataset():
    return planted_dataset()


def week_of(day: str) -> WeekIndex:
    return WeekIndex.from_date(dt.date.fromisoformat(day))


_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed or (report.when == "call" and report.skipped)
    if failed or (report.when == "call" and number not in _CRITERIA):
        _CRITERIA[number] = ("FAIL" if failed else "PASS", title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}: {title}")

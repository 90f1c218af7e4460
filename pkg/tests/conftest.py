import numpy as np
import pytest

from mcpower.data import split, standardize_split, Standardizer
from mcpower.synthetic import linear_task


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def linear_split():
    x, y = linear_task(1000, seed=0)
    sp = split(x, y, (0.7, 0.15, 0.15), "shuffled", seed=0)
    st = Standardizer.fit(sp.x_train, sp.y_train, ["x"])
    return standardize_split(sp, st), st


# --- acceptance reporting -------------------------------------------------
# Tests marked ``criterion(n, title)`` get one summary line each at the end of
# the run; measured values come from ``record_property("measured", ...)``.

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        measured = dict(item.user_properties).get("measured", "")
        if rep.skipped and isinstance(rep.longrepr, tuple):
            measured = rep.longrepr[2].removeprefix("Skipped: ")
        _CRITERIA[num] = (status, title, measured)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        status, title, measured = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {title}" + (f"  [{measured}]" if measured else ""))

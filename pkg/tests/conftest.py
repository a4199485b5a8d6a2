import sys
import warnings
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from aslsl.dataset import make_dataset, make_view  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_dataset(rng, n=12, dims=(4, 3), k=2, missing=0.0):
    views = []
    presence = np.ones((len(dims), n), dtype=bool)
    if missing:
        for v in range(len(dims) - 1):
            presence[v, rng.choice(n, int(missing * n), replace=False)] = False
    for v, d in enumerate(dims):
        views.append(make_view(v, rng.random((d, n)), presence[v]))
    labels = (rng.random((k, n)) > 0.5).astype(float)
    labels[:, 0], labels[:, 1] = 1, 0  # keep every label row non-constant
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return make_dataset(views, labels)


@pytest.fixture
def small_dataset(rng):
    return random_dataset(rng, missing=0.25)


CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call":
        return
    number, title = mark.args
    detail = ""
    if report.failed and call.excinfo is not None:
        detail = str(call.excinfo.value).splitlines()[0][:160]
    else:
        detail = getattr(item, "criterion_detail", "")
    CRITERIA[number] = (title, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        title, status, detail = CRITERIA[number]
        line = f"criterion {number:2d} {status}: {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))

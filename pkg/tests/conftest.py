import os
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pseudotile import generators

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=15,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(autouse=True)
def _quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


@pytest.fixture(scope="session")
def fib():
    return generators.fibonacci_window(13)


@pytest.fixture(scope="session")
def fib_small():
    return generators.fibonacci_window(9)


@pytest.fixture(scope="session")
def chair():
    return generators.chair_window(4)


@pytest.fixture(scope="session")
def tau_matrix():
    return np.array([[generators.TAU]])


# one PASS/FAIL line per acceptance criterion, printed after the run
_CRITERIA: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    num = getattr(item.function, "criterion", None)
    if num is None:
        return
    title = (item.function.__doc__ or item.name).strip().splitlines()[0]
    ok = rep.passed or (rep.when != "call" and not rep.failed)
    prev = _CRITERIA.get(num, (title, True))
    _CRITERIA[num] = (title, prev[1] and ok)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(_CRITERIA):
        title, ok = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {title}")


def criterion(num: int):
    def mark(fn):
        fn.criterion = num
        return fn
    return mark

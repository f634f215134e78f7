import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_LABELS: dict[str, str] = {}
_OUTCOMES: dict[str, str] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        if item.fspath.basename == "test_acceptance.py":
            doc = (getattr(item, "function", None).__doc__ or item.name).strip().splitlines()[0]
            _LABELS[item.nodeid] = doc


def pytest_runtest_logreport(report):
    if report.nodeid not in _LABELS:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _OUTCOMES[report.nodeid] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, label in _LABELS.items():
        if nodeid in _OUTCOMES:
            terminalreporter.write_line(f"{_OUTCOMES[nodeid]}  {label}")


@pytest.fixture
def rng():
    import numpy as np

    return np.random.default_rng(12345)

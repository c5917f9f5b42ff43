import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

_AC_LINES: dict[str, str] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def ac_record():
    """Record the one-line outcome of an acceptance criterion."""

    def record(name: str, ok: bool, detail: str) -> None:
        _AC_LINES[name] = f"{name} {'PASS' if ok else 'FAIL'}  {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _AC_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_AC_LINES, key=lambda s: int(s.split("-")[1])):
        terminalreporter.write_line(_AC_LINES[name])

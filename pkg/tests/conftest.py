import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from netblock import _backend

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

CRITERIA = {
    1: "solver matches proximal-gradient oracle",
    2: "noiseless exact recovery",
    3: "zero-solution threshold",
    4: "known-membership rank-one study",
    5: "multilayer rank and error trend",
    6: "membership re-estimation improvement",
    7: "bias-adjusted clustering quality",
    8: "spectral truncation sweep",
    9: "Frobenius lower bound property suite",
    10: "tuning benchmark and bound formula checks",
    11: "infrastructure checks",
}

_results: dict = {}


@pytest.fixture
def criterion():
    """Record the outcome of an acceptance criterion for the terminal summary."""

    def record(number: int, passed: bool, detail: str = "") -> bool:
        _results[number] = (bool(passed), detail)
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in CRITERIA.items():
        if number in _results:
            passed, detail = _results[number]
            status = "PASS" if passed else "FAIL"
        else:
            status, detail = "NOT RUN", ""
        line = f"criterion {number:2d} {status:7s} {title}"
        terminalreporter.write_line(f"{line}: {detail}" if detail else line)


@pytest.fixture(params=sorted(_backend.available()))
def backend(request):
    """Each available kernel module in turn."""
    return _backend.kernels(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hybridma.config import SystemParams

settings.register_profile("default", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def params():
    return SystemParams()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# -- acceptance report ---------------------------------------------------------

ACCEPTANCE: dict = {}


@pytest.fixture(scope="session")
def acceptance_log():
    """Maps criterion number to ``(passed, headline, detail lines)``."""
    return ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, headline, _ = ACCEPTANCE[k]
        tr.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {headline}")
    for k in sorted(ACCEPTANCE):
        details = ACCEPTANCE[k][2]
        if details:
            tr.write_line("")
            tr.write_line(f"criterion {k} details:")
            for line in details:
                tr.write_line(f"  {line}")

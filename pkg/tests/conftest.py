import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("medfront", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("medfront")

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _quiet_empty_filter_warning():
    # 128 mel filters over 65 FFT bins leave some rows empty; tests that care check it explicitly
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message=".*mel filters cover no FFT bin.*")
        yield

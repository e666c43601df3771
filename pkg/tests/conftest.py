import numpy as np
import pytest

from armsort.kinematics import default_chain
from armsort.sim import TrialSetup, run_trials

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def chain():
    return default_chain()


@pytest.fixture(scope="session")
def hundred_trials():
    """100 seeded 12-object trials with the calibrated noise model, traces kept."""
    return run_trials(100, 7, TrialSetup(keep_traces=True))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

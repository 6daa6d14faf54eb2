import warnings

import numpy as np
import pytest

from sisselect.exceptions import ConvergenceWarning

ACCEPTANCE_LINES = []


def pytest_configure(config):
    warnings.simplefilter("ignore", ConvergenceWarning)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

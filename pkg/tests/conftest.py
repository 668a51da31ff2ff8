import numpy as np
import pytest

from pmugame.attack import table1_risk
from pmugame.grid import ieee9

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def grid9():
    return ieee9()


@pytest.fixture(scope="session")
def risk9(grid9):
    return table1_risk(grid9)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from pointocp.adjoint import Observations
from pointocp.optimizer import ControlProblem

FOUR_POINTS = [(0.25, 0.25), (0.75, 0.25), (0.75, 0.75), (0.25, 0.75)]
FOUR_TARGETS = [3.0, -3.0, 3.0, -3.0]


@pytest.fixture(scope="session")
def four_point_problem():
    return ControlProblem(0.1, -10.0, 10.0, Observations(FOUR_POINTS, FOUR_TARGETS), "cubic(1)")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = {}


def record_acceptance(number, name, passed, detail):
    line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])

import numpy as np
import pytest

from critwave.closed_forms import ground_state_norms
from critwave.grids import FieldState, RadialGrid

# PASS/FAIL lines collected by the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def bump(r, amplitude=1.0, radius=1.0, power=4):
    return amplitude * np.clip(1.0 - (r / radius) ** 2, 0.0, None) ** power


@pytest.fixture(scope="session")
def K3():
    return ground_state_norms(3).K


@pytest.fixture
def bump_state():
    def make(n=1024, r_max=4.0, a0=0.5, R0=2.0, a1=0.3, R1=1.5, dim=3):
        g = RadialGrid(r_max, n)
        return FieldState(bump(g.r, a0, R0), bump(g.r, a1, R1), g, dim)

    return make

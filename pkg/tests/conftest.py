import numpy as np
import pytest

from pontrylie import PmpSolverConfig
from pontrylie.heisenberg import (
    heisenberg_algebra,
    heisenberg_problem,
    heisenberg_reduced_problem,
)

ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    """Collect acceptance verdict lines; they are echoed in the terminal summary."""
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def heis_algebra():
    return heisenberg_algebra()


@pytest.fixture(scope="session")
def heis_problem():
    return heisenberg_problem()


@pytest.fixture(scope="session")
def heis_reduced():
    return heisenberg_reduced_problem()


@pytest.fixture(scope="session")
def default_config():
    return PmpSolverConfig()


def so3_algebra():
    """so(3) with the cross-product structure constants and its matrix basis.

    Used as a second validated algebra (and as a non-nilpotent one for the
    exponential error path).
    """
    from pontrylie.lie import LieAlgebraSpec

    c = np.zeros((3, 3, 3))
    for i, j, k, s in ((0, 1, 2, 1.0), (1, 2, 0, 1.0), (2, 0, 1, 1.0)):
        c[i, j, k] = s
        c[j, i, k] = -s
    l1 = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])
    l2 = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
    l3 = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    return LieAlgebraSpec(dim=3, structure_constants=c, matrix_basis=(l1, l2, l3))

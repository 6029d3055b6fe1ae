import numpy as np
import pytest

from honestqse.core import DensityMatrix, counter_rng, random_density_matrix

ACCEPTANCE_RESULTS = []


@pytest.fixture
def rng():
    return counter_rng(12345)


@pytest.fixture
def record_criterion():
    def _record(name, passed, detail=""):
        ACCEPTANCE_RESULTS.append((name, bool(passed), detail))
        return passed
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")


def rand_state(rng, dim, rank=None):
    return random_density_matrix(dim, rng, rank)


ZERO = DensityMatrix.basis_state(0, 2)
ONE = DensityMatrix.basis_state(1, 2)
PLUS = DensityMatrix.pure([1.0, 1.0])
MIXED2 = DensityMatrix.maximally_mixed(2)
RHO_BAR = DensityMatrix(np.array([[0.75, 0.25], [0.25, 0.25]]))

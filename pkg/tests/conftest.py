import numpy as np
import pytest

from terrain_ipp.field import GridGeometry
from terrain_ipp.gp_map import MaternKernel, build_prior


@pytest.fixture(scope="session")
def ref_grid():
    return GridGeometry(30.0, 30.0, 0.75)


@pytest.fixture(scope="session")
def ref_prior(ref_grid):
    return build_prior(ref_grid, MaternKernel())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance():
    def report(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])

import numpy as np
import pytest

from swlab.grid import Grid2
from swlab.vortex import solve_vortex


def planar(n, radius):
    return Grid2(n, n, 2.0 * radius / n)


@pytest.fixture(scope="session")
def grid10():
    return planar(160, 10.0)


@pytest.fixture(scope="session")
def one_vortex(grid10):
    return solve_vortex([0j], grid10)


@pytest.fixture(scope="session")
def pair_vortex(grid10):
    return solve_vortex([-1 + 0j, 1 + 0j], grid10)


@pytest.fixture(scope="session")
def flat_vortex(grid10):
    return solve_vortex([], grid10)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance line and fail the test when the check fails."""
    num = int(request.node.name.split("_")[2])
    _ACCEPTANCE[num] = f"criterion {num:>2}: FAIL  (error before the check completed)"

    def record(num, ok, detail):
        line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[num] = line
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in range(1, 14):
        terminalreporter.write_line(_ACCEPTANCE.get(num, f"criterion {num:>2}: not run"))

import numpy as np
import pytest

from gpnav.fields import GridGeometry, OccupancyGrid


def random_grid(rng, w=32, h=32, density=0.2, cell_size=1.0, origin=(0.0, 0.0)):
    geom = GridGeometry(origin, cell_size, w, h)
    return OccupancyGrid(geom, rng.random((h, w)) < density)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """``criterion(n, ok, detail)`` records and prints one pass/fail line, then asserts."""
    def record(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[n] = line
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])

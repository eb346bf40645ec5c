import numpy as np
import pytest

from fluidgeom.grid import Grid2D

ACCEPTANCE = {}


def record(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_grid():
    return Grid2D.from_extent((-0.5, 0.5), (-0.5, 0.5), 17, 17)

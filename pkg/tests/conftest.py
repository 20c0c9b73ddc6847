import numpy as np
import pytest
from hypothesis import settings

from wavelab.spectral_core import PeriodicGrid

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")


@pytest.fixture
def grid64():
    return PeriodicGrid(64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_field(grid, rng, kmax=None, holo=False):
    """Band-limited random complex field."""
    kmax = kmax or grid.n_points // 4
    c = np.zeros(grid.n_points, complex)
    mask = np.abs(grid.index) <= kmax
    if holo:
        mask &= grid.index <= 0
    m = int(mask.sum())
    c[mask] = rng.normal(size=m) + 1j * rng.normal(size=m)
    return grid.ifft(c)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from kawahara_nfr.spectral import FrequencyGrid, SpectralState


def hermitian_state(grid, rng, decay=1.0):
    """Random real state on the active band with ``<xi>^-decay`` coefficients."""
    n = grid.n
    c = (rng.normal(size=n) + 1j * rng.normal(size=n)) * grid.japanese(-decay)
    c[0] = 0.0
    c[1:] = 0.5 * (c[1:] + np.conj(c[1:][::-1]))
    return SpectralState(grid, c, reality_flag=True)


@pytest.fixture
def small_grid():
    return FrequencyGrid(4 * np.pi, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])

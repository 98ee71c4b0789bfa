import numpy as np
import pytest

from bdglab.paths import SeedSpec, make_uniform_grid, simulate_brownian


@pytest.fixture(scope="session")
def small_batch():
    return simulate_brownian(make_uniform_grid(1.0, 20), 1, 2000, SeedSpec(101))


@pytest.fixture(scope="session")
def desk_batch():
    """T = 1, N = 50, M = 1e5: the desk-scale configuration used by the oracles."""
    return simulate_brownian(make_uniform_grid(1.0, 50), 1, 100_000, SeedSpec(20240501), workers=4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

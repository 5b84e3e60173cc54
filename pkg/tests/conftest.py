import numpy as np
import pytest

from stopbound import SamplerConfig, preset, solve
from stopbound.pde import PdeConfig, solve_vi

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def fig1():
    return preset("fig1")


@pytest.fixture(scope="session")
def fig3():
    return preset("fig3")


@pytest.fixture(scope="session")
def fig1_solved(fig1):
    """Fig-1 preset solved at the documented defaults (grid 40, N = 1e5, seed 1)."""
    return solve(fig1, 40, SamplerConfig(100_000, 1))


@pytest.fixture(scope="session")
def fig1_tight(fig1):
    """Same problem iterated down to the Monte-Carlo noise floor."""
    return solve(fig1, 40, SamplerConfig(100_000, 1), tol=1e-3, max_iter=40)


@pytest.fixture(scope="session")
def fig1_pde(fig1):
    return solve_vi(fig1, PdeConfig())


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)

from __future__ import annotations

import math

import numpy as np
import pytest

from lpflow.counterexample import CounterexampleSpec, build_u0, default_grid
from lpflow.spectral_core import make_grid


@pytest.fixture(scope="session")
def grid():
    """Simulation grid: N = 2048, L = 16 pi (dxi = 1/8)."""
    return default_grid()


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(64, 2 * math.pi)


@pytest.fixture(scope="session")
def ga_spec():
    return CounterexampleSpec.grid_adapted()


@pytest.fixture(scope="session")
def u0(ga_spec, grid):
    return build_u0(ga_spec, grid)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])

import numpy as np
import pytest

from nmcontrol.bloch import REFERENCE_INITIAL_STATE, TimeGrid
from nmcontrol.reservoir import Method, ReservoirParams, coefficient_trace

HIGH_T = ReservoirParams(alpha2=0.01, omega0=1.0, r=0.1, kBT=300.0)


@pytest.fixture(scope="session")
def grid():
    return TimeGrid()


@pytest.fixture(scope="session")
def x0():
    return REFERENCE_INITIAL_STATE.as_array()


@pytest.fixture(scope="session")
def high_t_exact(grid):
    return coefficient_trace(grid, HIGH_T, Method.EXACT)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

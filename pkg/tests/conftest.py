import numpy as np
import pytest

from impulsegame import GridSpec, builtin_problem


@pytest.fixture
def p1_spec():
    return builtin_problem("P1_null_flow", {"alpha": 0.5})


@pytest.fixture
def p2_spec():
    return builtin_problem("P2_adversarial_drift", {"alpha": 0.5, "beta": 0.1})


@pytest.fixture
def p3_spec():
    return builtin_problem(
        "P3_cash_management", {"kappa": 0.3, "k": 0.1, "mu": 0.2, "h": 1.0})


@pytest.fixture
def p1_grid():
    return GridSpec((-2.0,), (2.0,), (101,), 50)


@pytest.fixture
def coarse_grid():
    # five nodes at the integers of [-2, 2]
    return GridSpec((-2.0,), (2.0,), (5,), 4)


def node_index(grid, x):
    """Index of the grid node closest to scalar x."""
    nodes = grid.node_array()[:, 0]
    return int(np.argmin(np.abs(nodes - x)))

from __future__ import annotations

import numpy as np
import pytest

from dglab.geometry import Grid, RegionPartition
from dglab.solver import BoundaryData, EquationCoefficients, solve_degenerate_limit, solve_parabolic
from dglab.weights import WeightField


def heat_solution(nx: int = 201, nt: int = 201, t_hi: float = 0.1):
    """Sine data on (0, 1) with zero lateral values, unit weight."""
    g = Grid(0.0, 1.0, t_hi, nx, nt)
    w = WeightField.constant(RegionPartition.trivial(g), 1.0)
    bd = BoundaryData(lambda x, t: np.where(t == 0, np.sin(np.pi * x), 0.0))
    return solve_parabolic(EquationCoefficients.constant(g), w, bd), w


def step_example(nx: int = 201, nt: int = 201):
    """Weight 1 on x < 0 and 0 on x > 0, lateral data jumping from 1 to 2 at t = 1."""
    g = Grid(-1.0, 1.0, 2.0, nx, nt)
    w = WeightField.piecewise(RegionPartition.from_line(g, 0.0, 0.0), 1.0, 0.0)
    bd = BoundaryData(lambda x, t: np.where(t <= 1 + 1e-12, 1.0, 2.0) + 0.0 * x)
    return g, w, bd


@pytest.fixture(scope="session")
def heat201():
    return heat_solution()


@pytest.fixture(scope="session")
def step_limit():
    g, w, bd = step_example()
    return solve_degenerate_limit(EquationCoefficients.constant(g), w, bd), w


@pytest.fixture
def grid201() -> Grid:
    return Grid(-1.0, 1.0, 1.0, 201, 201)

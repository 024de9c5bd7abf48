"""Shared fixtures: default model, a weak-gain model and small grids."""

import pytest

from kernel.noise import GridSpec
from physics.opa import OpaParams


@pytest.fixture
def default_params() -> OpaParams:
    return OpaParams()


@pytest.fixture
def weak_params() -> OpaParams:
    return OpaParams(sigma=1.0)


@pytest.fixture
def vacuum_params() -> OpaParams:
    return OpaParams(sigma=0.0)


@pytest.fixture
def small_grid() -> GridSpec:
    return GridSpec(delta=2.0, t_window=2.0)


@pytest.fixture
def row_grid() -> GridSpec:
    return GridSpec(delta=2.0, t_window=2.0, nx=3, ny=1, nt=1)

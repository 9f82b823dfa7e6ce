import numpy as np
import pytest

from epdecay import Grid, RealField


@pytest.fixture(scope="session")
def grid16():
    return Grid(16)


@pytest.fixture(scope="session")
def grid32():
    return Grid(32)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def random_real_field(grid: Grid, rng, zero_mean: bool = False) -> RealField:
    v = rng.standard_normal(grid.shape)
    if zero_mean:
        v = v - v.mean()
    return RealField(grid, v)


def cos_x1(grid: Grid) -> RealField:
    X = np.broadcast_to(grid.coordinates[0], grid.shape)
    return RealField(grid, np.cos(2.0 * np.pi * X / grid.box_length))

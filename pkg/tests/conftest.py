"""Shared fixtures: grids are session-scoped because their solver caches are
expensive to warm and all operations on them are pure."""

import numpy as np
import pytest

from gqg.grid import ChannelGrid
from gqg.initial import random_state


@pytest.fixture(scope="session")
def grid16():
    return ChannelGrid(16, 16, 16)

@pytest.fixture(scope="session")
def grid32():
    return ChannelGrid(32, 32, 32)


@pytest.fixture(scope="session")
def mesh32(grid32):
    return np.meshgrid(grid32.x, grid32.y, grid32.z, indexing="ij")


def random_primitive(grid, seed=0, eps=0.1, amplitude=0.05, bandwidth=3):
    return random_state(grid, eps, seed=seed, amplitude=amplitude, bandwidth=bandwidth)


def rel_max_err(a, b):
    denom = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-300)
    return np.max(np.abs(a - b)) / denom

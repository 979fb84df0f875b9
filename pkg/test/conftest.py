import numpy as np
import pytest

from svx.volume import LabelMap, Volume


pytest_plugins = ["pytester"]


@pytest.fixture
def bright_block():
    """12x4x4 volume, bright for x in 4..7, cut into 2-voxel x-slabs (ids 0..5)."""
    values = np.zeros((12, 4, 4))
    values[4:8] = 1.0
    slabs = np.repeat(np.arange(6), 2)[:, np.newaxis, np.newaxis] * np.ones((1, 4, 4), dtype=np.int64)
    return Volume(values), LabelMap(slabs)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

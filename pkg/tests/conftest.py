import numpy as np
import pytest

from crowdal.density import DensityMap


def make_map(values, cell_size=16.0):
    return DensityMap(values=np.asarray(values, dtype=float),
                      cell_size=cell_size)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

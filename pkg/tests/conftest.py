import numpy as np
import pytest

from bearing_reg.geometry import SensorConfig
from bearing_reg.simulator import SQUARE_CORNERS

SIGMA = 0.0261


@pytest.fixture
def pair_sensors():
    return SensorConfig(1, (0.0, 0.0), SIGMA), SensorConfig(2, (10.0, 0.0), SIGMA)


@pytest.fixture
def square_sensors():
    return {n + 1: SensorConfig(n + 1, c, SIGMA) for n, c in enumerate(SQUARE_CORNERS)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

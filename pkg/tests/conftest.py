import pytest
from hypothesis import HealthCheck, settings

from cfumppi.env import GridGeometry, PolygonEnvironment, empty_perception, oracle_local_maps
from helpers import square

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def open_perception():
    return empty_perception(GridGeometry.centered(8.0, 0.05))


@pytest.fixture
def wall_ahead():
    """Local map with a wall filling x in [0.5, 1.5] in front of the robot."""
    env = PolygonEnvironment((-5.0, -5.0, 5.0, 5.0), (square(0.5, -4.0, 1.5, 4.0),))
    return env, oracle_local_maps(env, (0.0, 0.0, 0.0))

import numpy as np
import pytest

from legplan.robot import hexapod, quadruped
from legplan.terrain import ScenarioSpec, default_start_goal, generate_scenario


@pytest.fixture(scope="session")
def hex_model():
    return hexapod()


@pytest.fixture(scope="session")
def quad_model():
    return quadruped()


@pytest.fixture(scope="session")
def flat_map():
    return generate_scenario(ScenarioSpec("flat"))


@pytest.fixture(scope="session")
def rough_map():
    return generate_scenario(ScenarioSpec("rough"))


@pytest.fixture(scope="session")
def start_goal():
    return default_start_goal()


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)

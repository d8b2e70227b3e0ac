import numpy as np
import pytest

from models import DEFAULT_SENSITIVITY_DBM, Protocol, ScenarioConfig, validate_config


@pytest.fixture
def default_scenario():
    return ScenarioConfig.defaults()


@pytest.fixture
def default_cfg():
    return validate_config(ScenarioConfig.defaults())


@pytest.fixture
def coop_cfg():
    return validate_config(ScenarioConfig(protocol=Protocol.COOPERATIVE, n_r=3))


@pytest.fixture
def strong_link_scenario():
    """One sensor, links so strong that fading never drops a frame"""
    return ScenarioConfig(n_sensors=1, lambda_rate=0.1, gamma_db=80.0, protocol=Protocol.NO_RELAY)


@pytest.fixture
def silent_scenario():
    """No traffic at all; frames are injected by hand"""
    return ScenarioConfig(n_sensors=2, lambda_rate=0.0, gamma_db=80.0)


@pytest.fixture
def sensitivity_table():
    return dict(DEFAULT_SENSITIVITY_DBM)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

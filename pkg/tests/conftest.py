import logging

import numpy as np
import pytest

import discretize
import model


@pytest.fixture
def params():
    """n=2, delta=1, q=3: the equation used throughout the examples."""
    return model.ModelParams(2, 1.0, 3.0)


@pytest.fixture
def system(params):
    return discretize.DiscreteSystem(params, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    caplog.set_level(logging.WARNING)

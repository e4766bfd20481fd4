import numpy as np
import pytest

from impulsectl.instances import random_instances, two_state

ACCEPTANCE_SEED = 2024


@pytest.fixture
def model2():
    return two_state()


@pytest.fixture(scope="session")
def instances50():
    return random_instances(ACCEPTANCE_SEED, 50)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

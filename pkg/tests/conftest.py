import numpy as np
import pytest

from edgespot.config import ModelConfig
from edgespot.weights import random_bundle

import helpers


@pytest.fixture(scope="session")
def small_cfg():
    return ModelConfig("edgespot", 1)


@pytest.fixture(scope="session")
def small_bundle(small_cfg):
    return random_bundle(small_cfg, seed=11)


@pytest.fixture(scope="session")
def sep_bundle():
    return helpers.separable_bundle()


@pytest.fixture
def rng():
    return np.random.default_rng(0)

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def rgb_image(rng):
    return rng.random((48, 64, 3))


@pytest.fixture
def gray_image(rng):
    return rng.random((32, 32, 1))

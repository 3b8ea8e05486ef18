import numpy as np
import pytest

from skewlab import (
    BumpFunction,
    ExpandingCircleMap,
    LinearToralEndomorphism,
    RotationExtension,
)

SQRT2 = np.sqrt(2.0)
A_U = 2.0 + SQRT2
A_S = 2.0 - SQRT2
LOG_A_U = 1.2279471772995156
LOG_A_S = -0.5347999967395706


@pytest.fixture(scope="session")
def cat_map():
    return LinearToralEndomorphism([[3, 1], [1, 1]])


@pytest.fixture(scope="session")
def coupled_F(cat_map):
    return RotationExtension(cat_map, BumpFunction.default_for(cat_map))


@pytest.fixture(scope="session")
def product_F(cat_map):
    return RotationExtension(cat_map, None)


@pytest.fixture(scope="session")
def doubling_F():
    base = ExpandingCircleMap(2)
    return RotationExtension(base, BumpFunction.default_for(base))


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)

import numpy as np
import pytest

from metamorph.energy import MaterialParams, ModelKind
from metamorph.grid_fem import make_grid

from tests.helpers import FULL_MODEL


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid8():
    return make_grid(8, 8)


@pytest.fixture
def grid4():
    return make_grid(4, 4)


@pytest.fixture
def ogden():
    return MaterialParams(**FULL_MODEL, gamma=1e-3)


@pytest.fixture
def simplified():
    return MaterialParams(kind=ModelKind.SIMPLIFIED, gamma=1e-3, delta=1e-2)

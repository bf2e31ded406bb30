import numpy as np
import pytest

from cconvex.costs import make_cost
from cconvex.domains import Box, DomainPair

BIG = DomainPair(Box([-3.0, -3.0], [3.0, 3.0]), Box([-3.0, -3.0], [3.0, 3.0]))


@pytest.fixture(scope="session")
def quadratic():
    return make_cost("quadratic")


@pytest.fixture(scope="session")
def quadratic_big():
    return make_cost("quadratic", BIG)


@pytest.fixture(scope="session")
def bilinear():
    return make_cost("bilinear")


@pytest.fixture(scope="session")
def power():
    return make_cost("power")


@pytest.fixture(scope="session")
def sqrt_cost():
    return make_cost("sqrt")


@pytest.fixture(scope="session")
def log_cost():
    return make_cost("log")


def sample_pairs(model, n, seed=0):
    rng = np.random.default_rng(seed)
    return model.domain.X.sample(rng, n), model.domain.Y.sample(rng, n)

import pytest

from slowmix.flow import realize
from slowmix.profile import make_cosine_bump


@pytest.fixture(scope="session")
def cosine():
    return make_cosine_bump()


@pytest.fixture(scope="session")
def strong_flow(cosine):
    """A = 50 realization at kappa = 1/16."""
    return realize(1 / 16, 50.0, cosine, 7, 16)


@pytest.fixture(scope="session")
def gentle_flow(cosine):
    """Small-amplitude realization whose transported fields stay grid-resolved."""
    return realize(1 / 4, 0.02, cosine, 3, 8)

import pytest

from ergobound import models


@pytest.fixture(scope="session")
def jacobi_uniform():
    """Jacobi(a=1, b=2, sigma2=2): uniform stationary law on (0,1)."""
    return models.jacobi(1.0, 2.0, 2.0)


@pytest.fixture(scope="session")
def tanou_half():
    """tan-OU with rho = 1/2: stationary density cos(x)/2."""
    return models.tanou(0.5)


@pytest.fixture(scope="session")
def mao3():
    return models.maoclass(3.0)

import pytest

from mginf.service_law import validate


@pytest.fixture
def base():
    """lambda=1, rho=1, p=0, beta=0."""
    return validate(1.0, 1.0, 0.0, 0.0)


@pytest.fixture
def light():
    """lambda=1, rho=0.5, p=0, beta=0 (series regime)."""
    return validate(1.0, 0.5, 0.0, 0.0)


@pytest.fixture
def mixed():
    """lambda=1, rho=0.5, p=0.2, beta=0.1."""
    return validate(1.0, 0.5, 0.1, 0.2)


@pytest.fixture
def degenerate():
    return validate(1.0, 1.0, -1.0, 0.0)

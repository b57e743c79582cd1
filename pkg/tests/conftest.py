import numpy as np
import pytest

from blumecapel import Parameters


@pytest.fixture
def desk() -> Parameters:
    """Desk-scale corner-nucleation parameters (lam > h > lam/2, l_c = 2)."""
    return Parameters(J=1.0, lam=1.4, h=0.8, L=12, beta=2.0)


@pytest.fixture
def small_fields() -> Parameters:
    """Parameters passing the smallness gate (J >> lam, h)."""
    return Parameters(J=1.0, lam=0.015, h=0.01, L=4, beta=2.0)


def random_configuration(rng: np.random.Generator, L: int):
    from blumecapel import SpinConfiguration

    return SpinConfiguration(rng.integers(-1, 2, size=(L, L)).astype(np.int8))

import numpy as np
import pytest

from extinctd.models import make_linear_sde, make_lorenz, make_ricker, make_sis


@pytest.fixture(scope="session")
def sis_k2():
    """Single-regime SIS on the 2-node complete graph, delta=1, beta=0.3."""
    return make_sis([[0, 1], [1, 0]], beta=0.3, delta=1.0)


@pytest.fixture(scope="session")
def sis_switching():
    """Two-regime SIS with asymmetric switching, rho = (2/3, 1/3)."""
    return make_sis([[0, 1], [1, 0]], beta=[0.2, 0.5], delta=[1.2, 0.8],
                    Q=[[-1.0, 1.0], [2.0, -2.0]])


@pytest.fixture(scope="session")
def lorenz_noisy():
    return make_lorenz(gamma=1.0, z_star=0.5, eta=1.0, alpha0=0.05)


@pytest.fixture(scope="session")
def lorenz_det():
    return make_lorenz(gamma=1.0, z_star=0.5, eta=1.0, alpha0=0.0)


@pytest.fixture(scope="session")
def ricker_extinct():
    return make_ricker(r=-0.3, sigma=0.2)


@pytest.fixture(scope="session")
def linear_det():
    return make_linear_sde(np.diag([-1.0, -3.0]))

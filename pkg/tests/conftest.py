import numpy as np
import pytest

from der_lab.liegroup import LieGroupGeometry, su2_constants
from der_lab.solver import newton_critical, round_state


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def su2():
    return LieGroupGeometry.named("su2")


@pytest.fixture(scope="session")
def round_pair():
    return newton_critical(su2_constants(), 1.5, round_state(1.5))


def random_sym(rng, n=3, scale=1.0):
    a = rng.normal(size=(n, n))
    return scale * (a + a.T)


def random_spd(rng, n=3):
    a = rng.normal(size=(n, n))
    return a @ a.T + 0.5 * np.eye(n)


def random_spinor(rng, N=2):
    return rng.normal(size=N) + 1j * rng.normal(size=N)

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qlinsolve.pde import (
    HeatConfig,
    burgers_ode,
    carleman_implicit_system,
    carleman_matrix,
    heat_matrix,
    random_complex_tridiagonal,
)

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

COMPLEX_SEED = 15


@pytest.fixture(scope="session")
def heat_A():
    return heat_matrix(HeatConfig())


@pytest.fixture(scope="session")
def burgers_L():
    sys = carleman_matrix(burgers_ode(7, 0.01), 2)
    L, _ = carleman_implicit_system(sys, np.zeros(sys.dimension), 0.1)
    return L


@pytest.fixture(scope="session")
def complex_system():
    return random_complex_tridiagonal(3, COMPLEX_SEED)


def random_complex(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)

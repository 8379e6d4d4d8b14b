import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gentle_perturb import build_space, density_library

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def semicircle():
    return density_library("semicircle")


@pytest.fixture(scope="session")
def indicator():
    return density_library("indicator")


@pytest.fixture(scope="session")
def sc1024(semicircle):
    return build_space(semicircle, 4.0, 1024)


@pytest.fixture(scope="session")
def sc2048(semicircle):
    return build_space(semicircle, 4.0, 2048)


@pytest.fixture(scope="session")
def ind1024(indicator):
    return build_space(indicator, 4.0, 1024)


@pytest.fixture
def rng():
    return np.random.default_rng(20261017)


def wnorm(v, space):
    """Weighted norm of support-subgrid samples (columns if 2-d)."""
    w = space.w_s if v.ndim == 1 else space.w_s[:, None]
    return np.sqrt(np.sum(np.abs(v) ** 2 * w, axis=0))


def grid_tol(N):
    """O(dt) tolerance, anchored at 1e-3 for N = 1024."""
    return 1e-3 * 1024 / N

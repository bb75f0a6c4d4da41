import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import qddlab as q

settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)


@pytest.fixture(scope="session")
def make_setup():
    """Build (grid, steady, generator) for a product quadratic potential."""

    def build(d, n, lam=0.0, xbar=0.5):
        grid = q.Grid(d, n)
        steady = q.steady_state(tuple(q.Quadratic(lam, xbar) for _ in range(d)), grid)
        return grid, steady, q.assemble(steady)

    return build

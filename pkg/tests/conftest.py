import numpy as np
import pytest
from hypothesis import settings

from fermi_detector.spacetimes import SpacetimeId, lookup

settings.register_profile("default", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("default")


@pytest.fixture(scope="session")
def minkowski():
    return lookup(SpacetimeId("minkowski-inertial"))


@pytest.fixture(scope="session")
def schwarzschild():
    return lookup(SpacetimeId("schwarzschild", {"mass": 1.0}))


@pytest.fixture(scope="session")
def rindler():
    return lookup(SpacetimeId("minkowski-rindler-chart", {"acceleration": 0.5}))


@pytest.fixture(scope="session")
def de_sitter():
    return lookup(SpacetimeId("de-sitter-static", {"hubble": 0.1}))


def random_rotation(rng):
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q

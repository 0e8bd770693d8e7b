import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import sdm

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def argon():
    return sdm.ARGON


@pytest.fixture(scope="session")
def hydrogen():
    return sdm.HYDROGEN


@pytest.fixture(scope="session")
def small_grid():
    """Cheap grid for stepper unit tests."""
    return sdm.Grid(-30.0, 30.0, 256)


@pytest.fixture(scope="session")
def argon_ground_small(small_grid, argon):
    return sdm.init_state(
        sdm.SystemKind.CLOSED_QUANTUM, argon, sdm.EigenstateSpec(1), small_grid
    )

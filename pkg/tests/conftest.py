"""
Shared test fixtures
"""

import numpy as np
import pytest

from src.coins import create_coin_assignment, grover, u2
from src.sim_config import get_simulation_config


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(autouse=True)
def fresh_settings():
    get_simulation_config.cache_clear()
    yield
    get_simulation_config.cache_clear()


@pytest.fixture
def grover_cage_coins():
    """G4 hubs with U2(pi/4, pi, 0, 0) rims."""
    return create_coin_assignment(grover(4), u2(np.pi / 4, np.pi, 0.0, 0.0))


@pytest.fixture
def dc_coins():
    """Builder: hub coin with b = U2(theta, phi, 0, beta) and c = U2(theta, phi, omega, beta)."""

    def build(hub, theta, phi, omega, beta):
        return create_coin_assignment(hub, u2(theta, phi, 0.0, beta), u2(theta, phi, omega, beta))

    return build

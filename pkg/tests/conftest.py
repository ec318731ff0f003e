import numpy as np
import pytest

from utils.bridge_dynamics import BridgeParams, assemble_system

# reduced discretization for tests whose property does not depend on resolution
SMALL_GRID = {"panel_count": 64, "fd_points": 512}


@pytest.fixture(scope="session")
def default_system():
    return assemble_system(BridgeParams())


@pytest.fixture(scope="session")
def small_system():
    return assemble_system(BridgeParams(n_modes=4), **SMALL_GRID)


@pytest.fixture(scope="session")
def oscillator_system():
    """One mode per field, no hangers and no stretching."""
    return assemble_system(BridgeParams(n_modes=1, mode_flag="linear_decoupled"), **SMALL_GRID)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

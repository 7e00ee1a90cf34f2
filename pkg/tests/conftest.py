"""
Pytest configuration and shared fixtures.
"""

import pytest
import tempfile
from pathlib import Path

from toruscascade.lattice import LatticeVec, construct_family
from toruscascade.schedule import BetaMode, build_schedule


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture(scope="session")
def family():
    """Default family: m0 = (1, 0), K = 10."""
    return construct_family(LatticeVec(1, 0), 10)


@pytest.fixture(scope="session")
def small_family():
    """Short family for the spectral simulations."""
    return construct_family(LatticeVec(1, 0), 4)


@pytest.fixture(scope="session")
def schedule(family):
    """Two cycles at beta base 0.05, ratio 1/2: T = 0, 43, 126."""
    return build_schedule(family, 2, BetaMode("scaled", 0.05, 0.5))


@pytest.fixture(scope="session")
def fast_schedule(small_family):
    """One short cycle on the small family: t_k = 0.25, 1.5 and T_1 = 8."""
    return build_schedule(small_family, 1, BetaMode("scaled", 0.4, 0.5))


@pytest.fixture
def sample_config():
    """Sample run configuration."""
    return {
        'm0': [1, 0],
        'K': 6,
        'cycles': 2,
        'beta_mode': 'scaled',
        'beta_base': 0.1,
        'tol': 1e-9,
        'pert_cycles': [1, 2],
        'sobolev': [[1, 0], [3, 1]],
    }

"""
Pytest configuration and fixtures for hydrofriction tests.
"""

import os
import shutil
import sys
import tempfile

import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from hydrofriction.config import RunConfig
from hydrofriction.dispersion import (
    AtomParams,
    DimensionlessPoint,
    Kinematics,
    MaterialParams,
    from_dimensionless,
)

# Reference metal: omega_p = 1e16 rad/s, beta = 1e6 m/s
OMEGA_P = 1e16
BETA = 1e6


def reduced(u, omega_tilde=1.0, z_tilde=10.0, omega_p=OMEGA_P, beta=BETA, alpha=None):
    """SI (material, atom, kinematics) for a dimensionless point."""
    return from_dimensionless(
        DimensionlessPoint(u=u, omega_tilde=omega_tilde, z_tilde=z_tilde), omega_p, beta, alpha
    )


@pytest.fixture
def temp_dir():
    """Create a temporary directory for testing."""
    temp_path = tempfile.mkdtemp()
    yield temp_path
    shutil.rmtree(temp_path, ignore_errors=True)


@pytest.fixture
def material():
    """Reference metal at the upper plasma frequency."""
    return MaterialParams(omega_p=OMEGA_P, beta=BETA)


@pytest.fixture
def atom():
    """Atom resonant with the plasma frequency (omega_tilde = 1), hydrogen polarizability."""
    return AtomParams(omega_b=OMEGA_P)


@pytest.fixture
def supersonic():
    """u = 5 at z = 10 nm (z_tilde = 100)."""
    return Kinematics(v=5e6, z=10e-9)


@pytest.fixture
def subsonic():
    """u = 0.9 at z = 10 nm."""
    return Kinematics(v=9e5, z=10e-9)


@pytest.fixture
def reference_point():
    """u = 5, omega_tilde = 1, z_tilde = 10: the oracle comparison point."""
    return reduced(5.0)


@pytest.fixture
def run_config():
    """A single-point run config equivalent to the force2 example command."""
    return RunConfig(omega_p=OMEGA_P, beta=BETA, omega_b=OMEGA_P, z=10e-9, v=5e6)


@pytest.fixture
def single_thread(monkeypatch):
    """Pin the worker pool to one thread."""
    monkeypatch.setenv("HYDROFRICTION_THREADS", "1")

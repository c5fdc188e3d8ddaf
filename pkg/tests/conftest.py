"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from paramres.device import load_bundled_device
from paramres.spectrum import DeviceParams


@pytest.fixture(scope="session")
def device():
    return load_bundled_device()


@pytest.fixture(scope="session")
def zero_bias_params(device):
    from paramres.device import device_params

    return device_params(device)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260817)


@pytest.fixture()
def dispersive_params():
    """Hand-built parameter set comfortably inside the dispersive regime."""
    return DeviceParams(
        f1=3.80,
        f2=3.86,
        fc=5.90,
        eta1=0.235,
        eta2=0.233,
        etac=0.10,
        g1c=0.0923,
        g2c=0.0923,
        g12=0.0052,
    )


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = rng.normal(size=(dim, dim)) + 1.0j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))

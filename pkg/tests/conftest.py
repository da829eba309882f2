import numpy as np
import pytest

from floquetwell import floquet
from floquetwell.basis import WellConfig


@pytest.fixture(scope="session")
def cfg():
    return WellConfig()


@pytest.fixture(scope="session")
def sharp_scan(cfg):
    """Tracked curves over the first resonance crossing window."""
    return floquet.scan(cfg, np.arange(150.0, 200.0 + 1e-9, 0.5), watch=40)


@pytest.fixture(scope="session")
def broad_scan(cfg):
    return floquet.scan(cfg, np.arange(730.0, 790.0 + 1e-9, 0.5))


@pytest.fixture(scope="session")
def full_scan(cfg):
    """The 40 lowest curves tracked from the undriven well up to eps=800."""
    return floquet.scan(cfg, np.arange(0.0, 800.0 + 1e-9, 2.0), watch=40)

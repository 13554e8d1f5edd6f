import logging

import numpy as np
import pytest

from closed_geodesics import acceptance


@pytest.fixture(autouse=True, scope="session")
def _quiet_spectrum_logs():
    logging.getLogger("closed_geodesics").setLevel(logging.ERROR)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def sphere_spectrum():
    return acceptance.spectrum("sphere")[0]


@pytest.fixture(scope="session")
def torus_spectrum():
    return acceptance.spectrum("torus")[0]


@pytest.fixture(scope="session")
def sphere_geodesic():
    return acceptance.geodesic("sphere", (("radius", 1.0),), "equator")


@pytest.fixture(scope="session")
def torus_geodesic():
    return acceptance.geodesic("torus", (), "winding_1_0")

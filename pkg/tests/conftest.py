"""Shared fixtures.

The medium config is reused across test modules so the trajectory cache
(keyed on surface + config + path count) is hit instead of resimulated;
the acceptance module uses its own heavier config the same way.
"""

from __future__ import annotations

import numpy as np
import pytest

from lyaplab import geometry
from lyaplab.brownian import PathConfig
from lyaplab.presets import (
    fuchsian_genus2,
    rank1_unimodular,
    schottky_rank2,
    unitary_rank2,
    weight1_vhs,
    weight2_1k1,
)

CFG_MED = PathConfig(dt=0.02, horizon=120.0, rng_seed=5150)
N_MED = 240


@pytest.fixture(scope="session")
def octagon():
    return geometry.genus2_octagon()


@pytest.fixture(scope="session")
def quadrilateral():
    return geometry.cusped_quadrilateral()


@pytest.fixture(scope="session")
def free():
    return geometry.free_plane()


@pytest.fixture(scope="session")
def fuchsian_rep():
    return fuchsian_genus2().representation


@pytest.fixture(scope="session")
def unitary_rep():
    return unitary_rank2().representation


@pytest.fixture(scope="session")
def rank1_rep():
    return rank1_unimodular().representation


@pytest.fixture(scope="session")
def weight1_preset():
    return weight1_vhs()


@pytest.fixture(scope="session")
def weight2_preset():
    return weight2_1k1()


@pytest.fixture(scope="session")
def schottky_preset():
    return schottky_rank2()


@pytest.fixture()
def rng():
    return np.random.default_rng(987)

import logging

import numpy as np
import pytest

import gosta_sim as gs


@pytest.fixture(autouse=True)
def _quiet_bipartite_warnings(caplog):
    # Bipartite-topology warnings are expected on path/grid test graphs.
    logging.getLogger("gosta_sim.graph").setLevel(logging.ERROR)
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_symmetric_kernel(n, rng, scale=1.0):
    h = rng.normal(size=(n, n)) * scale
    h = (h + h.T) / 2.0
    np.fill_diagonal(h, 0.0)
    return gs.KernelMatrix.from_dense(h)


@pytest.fixture
def kernel_factory():
    return random_symmetric_kernel

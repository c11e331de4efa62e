import numpy as np
import pytest

from hsbmo.grid import make_grid
from hsbmo.kernels import build_propagator, named_system


@pytest.fixture(scope="session")
def grid1():
    return make_grid(1, 256, 1 / 16)


@pytest.fixture(scope="session")
def grid2():
    return make_grid(2, 64, 1 / 8)


@pytest.fixture(scope="session")
def lap1(grid1):
    return build_propagator(named_system("laplacian", 2), grid1)


@pytest.fixture(scope="session")
def lap2(grid2):
    return build_propagator(named_system("laplacian", 3), grid2)


@pytest.fixture(scope="session")
def lame2(grid2):
    return build_propagator(named_system("lame", 3), grid2)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

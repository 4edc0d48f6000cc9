import numpy as np
import pytest

from soliton_lab.ground_state import (
    refined,
    solve_ground_state,
)
from soliton_lab.radial_core import (
    make_grid,
)
from soliton_lab.spectral_analysis import (
    compute_sigma,
    eigenpair_imaginary,
)

# Coarse grid for profiles and dynamics; the dense one resolves the dipole near-kernel
# well enough for strip and root-space counts.
COARSE_GRID = (20.0, 400)
DENSE_GRID = (18.0, 500)


@pytest.fixture(scope='session')
def grid():
    return make_grid(*COARSE_GRID)


@pytest.fixture(scope='session')
def ground(grid):
    return solve_ground_state(1.0, grid)


@pytest.fixture(scope='session')
def ground_fine(ground):
    return refined(ground)


@pytest.fixture(scope='session')
def dense_ground():
    return solve_ground_state(1.0, make_grid(*DENSE_GRID))


@pytest.fixture(scope='session')
def mode(ground):
    return compute_sigma(ground)


@pytest.fixture(scope='session')
def eigenpairs(ground, mode):
    return eigenpair_imaginary(ground, 1, mode), eigenpair_imaginary(ground, -1, mode)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def gaussian(grid):
    def gaussian(center=0.0, width=1.0):
        return np.exp(-((grid.nodes - center) / width) ** 2)
    return gaussian

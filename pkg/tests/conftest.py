import numpy as np
import pytest

from sobolev_gpe import (CgConfig, ModelParams, assemble_laplacian, build_grid,
                         single_well_potential)


@pytest.fixture
def grid1d():
    return build_grid(1, (0.0, 1.0), 63)


@pytest.fixture
def grid2d_small():
    return build_grid(2, ((-1.0, 1.0), (-1.0, 1.0)), 12)


@pytest.fixture
def grid2d():
    return build_grid(2, ((-1.0, 1.0), (-1.0, 1.0)), 31)


@pytest.fixture
def well2d(grid2d):
    return single_well_potential(grid2d)


@pytest.fixture
def lap2d(grid2d):
    return assemble_laplacian(grid2d)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def tight_cg():
    return CgConfig(rel_tolerance=1e-12)

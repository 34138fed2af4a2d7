import numpy as np
import pytest

from delaydirac import (
    DelayConfig,
    PotentialPair,
    compute_kernels,
    find_spectrum,
    smooth_example_pair,
)
from delaydirac.presets import SMOOTH_EXAMPLE_A

UNIT_M = 512
UNIT_N = 60


@pytest.fixture(scope="session")
def cfg():
    return DelayConfig(SMOOTH_EXAMPLE_A)


@pytest.fixture(scope="session")
def zero_pair(cfg):
    grid = cfg.potential_grid(UNIT_M)
    z = np.zeros(UNIT_M, dtype=complex)
    return PotentialPair(grid, z, z)


@pytest.fixture(scope="session")
def smooth_pair(cfg):
    return smooth_example_pair(cfg, m=UNIT_M)


@pytest.fixture(scope="session")
def const_p_pair(cfg):
    grid = cfg.potential_grid(UNIT_M)
    return PotentialPair(grid, np.zeros(UNIT_M, complex), np.full(UNIT_M, 0.3, complex))


@pytest.fixture(scope="session")
def smooth_kernels(cfg, smooth_pair):
    return {nu: compute_kernels(smooth_pair, cfg, nu) for nu in (1, 2)}


@pytest.fixture(scope="session")
def smooth_spectra(smooth_kernels):
    return {
        (nu, j): find_spectrum(smooth_kernels[nu], j, UNIT_N)
        for nu in (1, 2)
        for j in (1, 2)
    }

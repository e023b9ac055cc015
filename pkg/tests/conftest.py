import numpy as np
import pytest

from phasechem.grid import GridSpec
from phasechem.ic import make_phi_ic, make_sigma_ic
from phasechem.potentials import AlphaSpec, ModelParams


@pytest.fixture
def grid64():
    return GridSpec((64,), (1.0,))


@pytest.fixture
def bench_params():
    return ModelParams(chi=1.0, lam=0.5, alpha=AlphaSpec.constant(0.0))


def bench_ics(grid):
    """Smooth benchmark initial data: mild interface + mild nutrient bump."""
    return (
        make_phi_ic(grid, "tanh_interface", center=0.5, width=0.25),
        make_sigma_ic(grid, "gaussian_bump", center=0.35, width=0.15, mass=1.0),
    )


@pytest.fixture
def bench_ic_fn():
    return bench_ics


def random_state(grid, seed=0, phi_scale=0.4, sigma_lo=0.3, sigma_hi=2.5):
    rng = np.random.default_rng(seed)
    phi = grid.field(phi_scale * (2.0 * rng.random(grid.n_cells) - 1.0))
    sigma = grid.field(sigma_lo + (sigma_hi - sigma_lo) * rng.random(grid.n_cells))
    return phi, sigma

import math

import numpy as np
import pytest

from conftest import random_state
from phasechem import grid as g
from phasechem.errors import NonpositiveSigma, NonZeroMean, OutOfDomain
from phasechem.functionals import (
    chemical_potential,
    dissipation,
    energy,
    fd_variational_errors,
    log_mean_faces,
    nutrient_potential,
    relative_dissipation,
    relative_energy,
    weak_strong_weight,
)
from phasechem.grid import Field, GridSpec
from phasechem.potentials import F, ModelParams, beta


def test_energy_constant_states_unit_box():
    grid = GridSpec((4,), (1.0,))
    params = ModelParams(chi=2.0, lam=0.0)
    rep = energy(grid.full(0.0), grid.full(1.0), params)
    # 0 (dirichlet) + 0 (potential) + 2 (coupling) + (-1) (entropy)
    assert rep.E_total == pytest.approx(1.0, abs=1e-14)
    assert rep.D == pytest.approx(0.0, abs=1e-14)

    params1 = ModelParams(chi=1.0, lam=0.0)
    rep_e = energy(grid.full(0.0), grid.full(math.e), params1)
    assert rep_e.E_total == pytest.approx(math.e, rel=1e-14)
    assert rep_e.sigma_entropy == pytest.approx(0.0, abs=1e-13)


def test_energy_two_cell_parts():
    # 1D n=2, h=1: dirichlet = 0.5, potential = 2 F(0.5); sigma == 1
    # contributes its entropy floor -|Omega| = -2 to the total.
    grid = GridSpec((2,), (2.0,))
    params = ModelParams(chi=0.0, lam=0.0)
    rep = energy(grid.field([-0.5, 0.5]), grid.full(1.0), params)
    assert rep.dirichlet == pytest.approx(0.5, abs=1e-14)
    assert rep.potential == pytest.approx(2 * F(0.5), rel=1e-13)
    assert rep.sigma_entropy == pytest.approx(-2.0, abs=1e-14)
    assert rep.E_total == pytest.approx(0.5 + 2 * F(0.5) - 2.0, rel=1e-13)


def test_energy_parts_always_sum(grid64):
    params = ModelParams(chi=1.3, lam=0.8, eps=0.2)
    for seed in range(5):
        phi, sigma = random_state(grid64, seed)
        rep = energy(phi, sigma, params)
        total = (
            rep.dirichlet + rep.potential + rep.coupling + rep.sigma_entropy + rep.eps_term
        )
        assert rep.E_total == pytest.approx(total, rel=1e-14)
        assert rep.D >= 0.0


def test_energy_eps_term_exact(grid64):
    phi, sigma = random_state(grid64, 1)
    eps = 0.37
    rep = energy(phi, sigma, ModelParams(chi=1.0, lam=0.0, eps=eps))
    rep0 = energy(phi, sigma, ModelParams(chi=1.0, lam=0.0))
    expected = 0.5 * eps * float(np.sum((sigma.values - 1.0) ** 2)) * grid64.cell_volume
    assert rep.eps_term == pytest.approx(expected, rel=1e-14)
    assert rep0.eps_term == 0.0
    assert rep.E_total - rep0.E_total == pytest.approx(expected, rel=1e-12)


def test_energy_coercivity_floor(grid64):
    lam = 1.1
    params = ModelParams(chi=2.0, lam=lam)
    for seed in range(10):
        phi, sigma = random_state(grid64, seed, phi_scale=0.9, sigma_lo=0.05, sigma_hi=6.0)
        rep = energy(phi, sigma, params)
        assert rep.E_total >= -grid64.volume * (1.0 + lam / 2.0) - 1e-12


def test_energy_rejects_inadmissible(grid64):
    params = ModelParams(chi=1.0)
    bad_phi = grid64.full(1.0)
    with pytest.raises(OutOfDomain):
        energy(bad_phi, grid64.full(1.0), params)
    with pytest.raises(NonpositiveSigma):
        energy(grid64.full(0.0), grid64.full(0.0), params)


def test_chemical_potential_constants(grid64):
    params = ModelParams(chi=2.0, lam=0.0)
    mu = chemical_potential(grid64.full(0.0), grid64.full(1.0), params)
    assert np.allclose(mu.values, -2.0, atol=1e-14)
    params2 = ModelParams(chi=1.5, lam=0.7)
    a, s = 0.3, 1.2
    mu2 = chemical_potential(grid64.full(a), grid64.full(s), params2)
    assert np.allclose(mu2.values, beta(a) - 0.7 * a - 1.5 * s, atol=1e-13)
    with pytest.raises(OutOfDomain):
        chemical_potential(grid64.full(1.0 - 1e-9), grid64.full(1.0), params)


def test_nutrient_potential_values(grid64):
    assert np.allclose(
        nutrient_potential(grid64.full(1.0), grid64.full(1.0), 3.0).values, 0.0, atol=1e-14
    )
    out = nutrient_potential(grid64.full(0.0), grid64.full(math.e), 1.0)
    assert np.allclose(out.values, 2.0, atol=1e-13)
    with pytest.raises(NonpositiveSigma):
        nutrient_potential(grid64.full(0.0), grid64.full(0.0), 1.0)


def test_variational_consistency(grid64):
    params = ModelParams(chi=1.0, lam=0.5, eps=0.05)
    for seed in range(3):
        phi, sigma = random_state(grid64, seed)
        err_phi, err_sig = fd_variational_errors(phi, sigma, params, max_cells=24, seed=seed)
        assert err_phi < 1e-6
        assert err_sig < 1e-6


def test_dissipation_values():
    grid = GridSpec((2,), (2.0,))
    params_zero = grid.full(0.2)
    D = dissipation(params_zero, grid.field([0.0, 1.0]), grid.full(1.0), chi=0.0)
    assert D == pytest.approx(1.0, abs=1e-14)
    # all-constant state dissipates nothing
    assert dissipation(grid.full(0.1), grid.full(2.0), grid.full(1.5), 1.0) == 0.0


def test_dissipation_nonnegative_random(grid64):
    rng = np.random.default_rng(12)
    for seed in range(5):
        phi, sigma = random_state(grid64, seed)
        mu = grid64.field(rng.standard_normal(grid64.n_cells))
        assert dissipation(phi, mu, sigma, 1.3) >= 0.0


def test_log_mean_faces_matches_definition():
    grid = GridSpec((3,), (3.0,))
    sig = grid.field([1.0, 1.0, 4.0])
    lm = log_mean_faces(sig).components[0]
    assert lm[0] == pytest.approx(1.0, rel=1e-12)  # equal neighbors
    assert lm[1] == pytest.approx(3.0 / math.log(4.0), rel=1e-12)


def test_relative_energy_identical_states(grid64):
    phi, sigma = random_state(grid64, 3)
    rep = relative_energy(phi, sigma, phi.copy(), sigma.copy(), M=2.0)
    assert rep.R == 0.0
    assert rep.kl_sigma == 0.0
    assert rep.v0dual_part == 0.0


def test_relative_energy_constant_kl():
    grid = GridSpec((4,), (1.0,))
    rep = relative_energy(grid.full(0.2), grid.full(2.0), grid.full(0.2), grid.full(1.0), M=1.0)
    assert rep.R == pytest.approx(2.0 - 1.0 - math.log(2.0), rel=1e-13)
    assert rep.v0dual_part == 0.0


def test_relative_energy_M_scaling(grid64):
    phi, sigma = random_state(grid64, 4)
    phi_ref = Field(grid64, phi.values + 0.01 * np.sin(np.arange(grid64.n_cells)))
    phi_ref.values -= np.mean(phi_ref.values) - np.mean(phi.values)
    sigma_ref = Field(grid64, sigma.values * 1.1)
    r1 = relative_energy(phi, sigma, phi_ref, sigma_ref, M=1.0)
    r2 = relative_energy(phi, sigma, phi_ref, sigma_ref, M=2.0)
    assert r2.kl_sigma == pytest.approx(r1.kl_sigma, rel=1e-14)
    assert r2.v0dual_part == pytest.approx(2.0 * r1.v0dual_part, rel=1e-10)


def test_relative_energy_zero_mean_enforced(grid64):
    phi, sigma = random_state(grid64, 5)
    shifted = Field(grid64, phi.values + 0.1)
    with pytest.raises(NonZeroMean):
        relative_energy(phi, sigma, shifted, sigma, M=1.0)
    rep = relative_energy(phi, sigma, shifted, sigma, M=1.0, recenter=True)
    assert rep.R == pytest.approx(0.0, abs=1e-13)  # same shape after recentering


def test_relative_energy_nonnegative_random(grid64):
    for seed in range(8):
        phi, sigma = random_state(grid64, seed)
        phi_ref, sigma_ref = random_state(grid64, seed + 100)
        rep = relative_energy(phi, sigma, phi_ref, sigma_ref, M=1.7, recenter=True)
        assert rep.R >= 0.0
        assert rep.kl_sigma >= 0.0


def test_relative_dissipation_absorption(grid64):
    params = ModelParams(chi=1.4, lam=0.6)
    for seed in range(6):
        phi, sigma = random_state(grid64, seed)
        phi_ref, sigma_ref = random_state(grid64, seed + 50)
        M = weak_strong_weight(params.chi, sigma_ref)
        W = relative_dissipation(phi, sigma, phi_ref, sigma_ref, params, M)
        ref_faces = log_mean_faces(sigma_ref)
        gl = g.grad(Field(grid64, np.log(sigma.values)))
        gl_ref = g.grad(Field(grid64, np.log(sigma_ref.values)))
        gphi = g.grad(phi)
        gphi_ref = g.grad(phi_ref)
        absorbed = 0.0
        for a in range(grid64.dim):
            da = gl.components[a] - gl_ref.components[a]
            db = gphi.components[a] - gphi_ref.components[a]
            absorbed += 0.5 * float(np.sum(ref_faces.components[a] * da**2))
            absorbed += 0.5 * M * float(np.sum(db**2))
        absorbed *= grid64.cell_volume
        assert W >= absorbed - 1e-10
        assert W >= 0.0


def test_weak_strong_weight():
    grid = GridSpec((4,), (1.0,))
    assert weak_strong_weight(0.5, grid.full(1.0)) == 1.0
    assert weak_strong_weight(2.0, grid.full(3.0)) == 12.0

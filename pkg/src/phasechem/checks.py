"""Named property-check battery behind the ``check`` CLI command.

Each check returns (ok, detail).  The battery covers the discrete calculus
identities, the scalar-inequality lemmas (with Monte-Carlo sampling), the
variational consistency of the potentials, and the absorption bound of the
relative dissipation.  Checks resolve the functions they exercise through the
module objects, so an injected fault in any of them is caught and named.
"""

from __future__ import annotations

import numpy as np

from . import functionals as fn
from . import grid as g
from . import potentials as pot
from . import solver as sv
from . import wsu
from .grid import Field, GridSpec
from .potentials import ModelParams

__all__ = ["CHECKS", "run_checks"]


def _random_grid_fields(seed: int = 0, n: int = 24):
    rng = np.random.default_rng(seed)
    grid = GridSpec((n, n - 5), (1.3, 0.9))
    u = grid.field(rng.standard_normal(grid.n_cells))
    v = grid.field(rng.standard_normal(grid.n_cells))
    return grid, u, v, rng


def _random_state(rng, grid):
    phi = grid.field(0.8 * (2.0 * rng.random(grid.n_cells) - 1.0))
    sigma = grid.field(0.3 + 2.0 * rng.random(grid.n_cells))
    return phi, sigma


def check_grid_conservation():
    grid, _u, _v, rng = _random_grid_fields(1)
    worst = 0.0
    for _ in range(20):
        w = grid.field(rng.standard_normal(grid.n_cells))
        scale = max(1.0, float(np.max(np.abs(w.values))))
        worst = max(worst, abs(g.integrate(g.laplacian(w))) / scale)
    ok = worst < 1e-12
    return ok, f"max |integral of laplacian| (relative) = {worst:.2e}"


def check_grid_divgrad_bitwise():
    grid, u, _v, _ = _random_grid_fields(2)
    ok = np.array_equal(g.div(g.grad(u)).values, g.laplacian(u).values)
    return ok, "div(grad(u)) vs laplacian(u): " + ("bitwise equal" if ok else "MISMATCH")


def check_grid_summation_by_parts():
    grid, _u, _v, rng = _random_grid_fields(3)
    worst = 0.0
    for _ in range(100):
        a = grid.field(rng.standard_normal(grid.n_cells))
        b = grid.field(rng.standard_normal(grid.n_cells))
        J = g.grad(a)
        resid = g.inner(g.div(J), b) + g.face_inner(J, g.grad(b))
        worst = max(worst, abs(resid))
    ok = worst < 1e-13
    return ok, f"max summation-by-parts residual = {worst:.2e}"


def check_grid_laplacian_symmetry():
    grid, u, v, _ = _random_grid_fields(4)
    sym = abs(g.inner(g.laplacian(u), v) - g.inner(u, g.laplacian(v)))
    neg = g.inner(g.laplacian(u), u)
    ok = sym < 1e-12 and neg <= 1e-12
    return ok, f"symmetry defect {sym:.2e}, <lap u, u> = {neg:.3e}"


def check_grid_neumann_inverse():
    grid, u, _v, _ = _random_grid_fields(5)
    f = Field(grid, u.values - np.mean(u.values))
    sol = g.inv_neumann_laplacian(f)
    resid = np.max(np.abs(-g.laplacian(sol).values - f.values))
    ok = resid < 1e-8 * max(1.0, float(np.max(np.abs(f.values)))) and abs(np.mean(sol.values)) < 1e-12
    return ok, f"max residual of -lap(u) = f: {resid:.2e}"


def check_grid_v0dual_identity():
    grid, u, _v, _ = _random_grid_fields(6)
    f = Field(grid, u.values - np.mean(u.values))
    lhs = g.v0dual_norm_sq(f)
    sol = g.inv_neumann_laplacian(f)
    gs = g.grad(sol)
    rhs = g.face_inner(gs, gs)
    ok = abs(lhs - rhs) < 1e-8 * max(lhs, 1.0)
    return ok, f"dual norm {lhs:.6e} vs grad-energy form {rhs:.6e}"


def check_potentials_beta_monotonicity():
    rng = np.random.default_rng(7)
    r = rng.uniform(-0.98, 0.98, 500)
    h = 1e-6
    slope = (pot.beta(r + h) - pot.beta(r - h)) / (2.0 * h)
    ok = bool(np.all(slope >= 2.0 - 1e-4))
    return ok, f"min finite-difference slope of beta = {float(np.min(slope)):.6f} (>= 2)"


def check_potentials_F_lambda_convexity():
    rng = np.random.default_rng(8)
    lam = 1.7
    worst = 0.0
    for _ in range(2000):
        a, b = np.sort(rng.uniform(-0.99, 0.99, 2))
        mid = 0.5 * (a + b)
        bend = (
            0.5 * (pot.F(a, lam) + 0.5 * lam * a**2 + pot.F(b, lam) + 0.5 * lam * b**2)
            - (pot.F(mid, lam) + 0.5 * lam * mid**2)
        )
        worst = min(worst, bend)
    ok = worst >= -1e-12
    return ok, f"min midpoint-convexity gap of F + (lam/2) r^2 = {worst:.2e}"


def check_potentials_gamma_pair():
    rng = np.random.default_rng(9)
    r = rng.uniform(-6.0, 6.0, 2000)
    r = r[np.abs(r) > 1e-3]  # keep clear of the kink at 0
    h = 1e-5
    fd = (pot.gamma_hat(r + h) - pot.gamma_hat(r - h)) / (2.0 * h)
    err = float(np.max(np.abs(fd - pot.gamma(r))))
    signs_ok = bool(np.all(pot.gamma(r) <= 0.0) and np.all(pot.gamma_hat(r) >= 0.0))
    rs = np.sort(r)
    lips = np.abs(np.diff(pot.gamma(rs))) / np.diff(rs)
    ok = err < 1e-6 and signs_ok and bool(np.all(lips <= 1.0 + 1e-9))
    return ok, f"max |d(gamma_hat) - gamma| = {err:.2e}; signs and 1-Lipschitz hold: {signs_ok}"


def check_potentials_fenchel_monte_carlo(n: int = 10**6):
    rng = np.random.default_rng(10)
    r = 1.0
    w = rng.uniform(-r, r, n) * (1 - 1e-12)
    wt = rng.uniform(-r, r, n) * (1 - 1e-12)
    u = np.exp(rng.normal(0.0, 1.5, n))
    ut = np.exp(rng.normal(0.0, 1.5, n))
    gap = pot.fenchel_gap(r, w, wt, u, ut)
    min_gap = float(np.min(gap))
    ok = min_gap >= -1e-12 * float(np.max(1.0 + u + ut))
    return ok, f"min Fenchel-Young gap over {n} tuples = {min_gap:.3e}"


def check_potentials_sqrt_lipschitz_class():
    # f' = 1/(1 + sqrt(r)) belongs to the hypothesis class; the sharp
    # constant is sup over xi of 2 xi f'(xi^2) = 2 xi / (1 + xi).
    cap = 100.0

    def f(r):
        s = np.sqrt(r)
        return 2.0 * (s - np.log1p(s))

    rep = pot.check_sqrt_lipschitz(f, cap, n_pairs=50_000, seed=11)
    xi = np.sqrt(np.linspace(0.0, cap, 200_001))
    proof_const = float(np.max(2.0 * xi / (1.0 + xi)))
    ok = (
        rep.lipschitz_estimate <= proof_const * (1 + 1e-9)
        and rep.lipschitz_estimate >= 0.95 * proof_const
        and rep.all_finite
    )
    return ok, (
        f"sampled constant {rep.lipschitz_estimate:.4f} within 5% of proof constant "
        f"{proof_const:.4f}; growth estimate {rep.growth_estimate:.4f}"
    )


def check_functionals_kl_nonnegative():
    rng = np.random.default_rng(12)
    s = np.exp(rng.normal(0, 2, 100_000))
    st = np.exp(rng.normal(0, 2, 100_000))
    kl = s - st - st * (np.log(s) - np.log(st))
    ok = float(np.min(kl)) >= -1e-12 * float(np.max(1 + s + st))
    return ok, f"min cellwise KL = {float(np.min(kl)):.3e}"


def check_functionals_coercivity_floor():
    rng = np.random.default_rng(13)
    grid = GridSpec((32,), (2.0,))
    lam = 1.3
    params = ModelParams(chi=2.0, lam=lam)
    worst = np.inf
    for _ in range(50):
        phi, sigma = _random_state(rng, grid)
        rep = fn.energy(phi, sigma, params)
        worst = min(worst, rep.E_total - (-(grid.volume) * (1.0 + lam / 2.0)))
    ok = worst >= -1e-12
    return ok, f"min margin above the coercivity floor = {worst:.3e}"


def check_functionals_variational_consistency():
    rng = np.random.default_rng(14)
    grid = GridSpec((24,), (1.0,))
    params = ModelParams(chi=1.0, lam=0.5, eps=0.1)
    worst_phi = worst_sig = 0.0
    for _ in range(3):
        phi, sigma = _random_state(rng, grid)
        e_phi, e_sig = fn.fd_variational_errors(phi, sigma, params)
        worst_phi = max(worst_phi, e_phi)
        worst_sig = max(worst_sig, e_sig)
    ok = worst_phi < 1e-6 and worst_sig < 1e-6
    return ok, f"max FD relative error: d/dphi {worst_phi:.2e}, d/dsigma {worst_sig:.2e}"


def check_functionals_relative_dissipation_absorption():
    rng = np.random.default_rng(15)
    grid = GridSpec((24,), (1.0,))
    params = ModelParams(chi=1.5, lam=0.7)
    worst = np.inf
    for _ in range(25):
        phi, sigma = _random_state(rng, grid)
        phi_ref, sigma_ref = _random_state(rng, grid)
        M = fn.weak_strong_weight(params.chi, sigma_ref)
        W = fn.relative_dissipation(phi, sigma, phi_ref, sigma_ref, params, M)
        ref_faces = fn.log_mean_faces(sigma_ref)
        gl = g.grad(Field(grid, np.log(sigma.values)))
        gl_ref = g.grad(Field(grid, np.log(sigma_ref.values)))
        gphi = g.grad(phi)
        gphi_ref = g.grad(phi_ref)
        absorbed = 0.0
        for a in range(grid.dim):
            da = gl.components[a] - gl_ref.components[a]
            db = gphi.components[a] - gphi_ref.components[a]
            absorbed += 0.5 * float(np.sum(ref_faces.components[a] * da**2))
            absorbed += 0.5 * M * float(np.sum(db**2))
        absorbed *= grid.cell_volume
        worst = min(worst, W - absorbed)
    ok = worst >= -1e-10
    return ok, f"min W minus absorbed lower bound = {worst:.3e}"


def check_wsu_pointwise_inequalities(n: int = 10**6):
    rep = wsu.pointwise_inequality_suite(n_samples=n, seed=16)
    ok = rep.violations == 0
    mins = {k: f"{v:.3e}" for k, v in rep.min_gaps.items()}
    return ok, f"{rep.violations} violations over {rep.n_samples} tuples; min gaps {mins}"


def check_solver_constant_fixed_point():
    grid = GridSpec((16,), (1.0,))
    params = ModelParams(chi=1.2, lam=0.4)
    cfg = sv.SolverConfig(dt=0.05)
    state = sv.State(grid.full(0.3), grid.full(0.8), grid.zeros(), 0.0)
    new, _ = sv.step(state, params, cfg, 0.05)
    dphi = float(np.max(np.abs(new.phi.values - 0.3)))
    dsig = float(np.max(np.abs(new.sigma.values - 0.8)))
    ok = dphi < 1e-12 and dsig < 1e-12
    return ok, f"constant-state drift: phi {dphi:.2e}, sigma {dsig:.2e}"


CHECKS = [
    ("grid_conservation", check_grid_conservation),
    ("grid_divgrad_bitwise", check_grid_divgrad_bitwise),
    ("grid_summation_by_parts", check_grid_summation_by_parts),
    ("grid_laplacian_symmetry", check_grid_laplacian_symmetry),
    ("grid_neumann_inverse", check_grid_neumann_inverse),
    ("grid_v0dual_identity", check_grid_v0dual_identity),
    ("potentials_beta_monotonicity", check_potentials_beta_monotonicity),
    ("potentials_F_lambda_convexity", check_potentials_F_lambda_convexity),
    ("potentials_gamma_pair", check_potentials_gamma_pair),
    ("potentials_fenchel_monte_carlo", check_potentials_fenchel_monte_carlo),
    ("potentials_sqrt_lipschitz_class", check_potentials_sqrt_lipschitz_class),
    ("functionals_kl_nonnegative", check_functionals_kl_nonnegative),
    ("functionals_coercivity_floor", check_functionals_coercivity_floor),
    ("functionals_variational_consistency", check_functionals_variational_consistency),
    ("functionals_relative_dissipation_absorption", check_functionals_relative_dissipation_absorption),
    ("wsu_pointwise_inequalities", check_wsu_pointwise_inequalities),
    ("solver_constant_fixed_point", check_solver_constant_fixed_point),
]


def run_checks(report=print) -> bool:
    """Run every check; report one line each; True iff all passed."""
    all_ok = True
    for name, func in CHECKS:
        try:
            ok, detail = func()
        except Exception as exc:  # a crash is a failure, attributed by name
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        all_ok &= ok
        report(f"{'ok  ' if ok else 'FAIL'} {name}: {detail}")
    return bool(all_ok)

"""Per-step verification of the discretely expressible structure relations.

What is checked per accepted step pair (n, n+1), always with the time-level
(n+1) fields inside space integrals (the convention the implicit scheme
solves):

* weak-formulation residuals of the phi and sigma equations against a fixed,
  versioned battery of test fields; the constant test field reproduces the
  mass laws;
* the integrated renormalized entropy identity
    d/dt int ln(sigma) = int |grad ln sigma|^2
                         - chi int grad ln sigma . grad phi + int alpha;
* the energy-dissipation law residual
    [E(n+1) - E(n)]/tau + D(n+1)
        - int alpha sigma (ln sigma + eps (sigma - 1) + chi (1 - phi));
* positivity / bound margins, the sigma-mass exponential bracket, and the
  cumulative entropy-production and entropy trackers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import grid as g
from .errors import NonpositiveSigma
from .functionals import EnergyReport, dissipation, energy, log_mean_faces
from .grid import Field, GridSpec
from .potentials import ModelParams, alpha_eval
from .solver import State

__all__ = [
    "TEST_BATTERY_VERSION",
    "default_test_battery",
    "weak_residuals",
    "entropy_identity_residual",
    "energy_law_residual",
    "StepDiagnostics",
    "DiagnosticsCollector",
]

TEST_BATTERY_VERSION = "v1"


def default_test_battery(grid: GridSpec, seed: int = 2024) -> list[tuple[str, Field]]:
    """Fixed battery of test fields: constants, coordinate monomials, and one
    seeded random field smoothed by a few Neumann heat steps.  Versioned so
    residual tables stay comparable across runs."""
    battery: list[tuple[str, Field]] = [("const", grid.full(1.0))]
    coords = grid.cell_centers()
    names = "xy"
    for a in range(grid.dim):
        battery.append((names[a], grid.field(coords[a])))
    battery.append((f"{names[0]}^2", grid.field(coords[0] ** 2)))
    rough = np.random.default_rng(seed).standard_normal(grid.n_cells)
    smooth = Field(grid, rough)
    h2 = min(grid.spacing) ** 2
    for _ in range(10):
        smooth = Field(grid, smooth.values + 0.2 * h2 * g.laplacian(smooth).values)
    battery.append(("smooth_random", smooth))
    return battery


def weak_residuals(
    state_prev: State,
    state_next: State,
    tau: float,
    params: ModelParams,
    battery: list[tuple[str, Field]] | None = None,
) -> dict[str, tuple[float, float]]:
    """Residuals of the two weak formulations against every test field.

    Returns {name: (phi_row, sigma_row)} with
      phi_row   = |<(phi' - phi)/tau, psi> + <grad mu', grad psi>|
      sigma_row = |<(sig' - sig)/tau, psi>
                   + <sigma' grad(ln sigma' + chi(1-phi')), grad psi>
                   - <alpha(phi', sigma') sigma', psi>|,
    with sigma' weighted on faces by its logarithmic mean.
    """
    if battery is None:
        battery = default_test_battery(state_prev.phi.grid)
    grid = state_prev.phi.grid
    vol = grid.cell_volume
    dphi = (state_next.phi.values - state_prev.phi.values) / tau
    dsig = (state_next.sigma.values - state_prev.sigma.values) / tau
    gmu = g.grad(state_next.mu)
    gln = g.grad(Field(grid, np.log(state_next.sigma.values)))
    gphi = g.grad(state_next.phi)
    sig_faces = log_mean_faces(state_next.sigma)
    alpha = np.broadcast_to(
        np.asarray(alpha_eval(params.alpha, state_next.phi.values, state_next.sigma.values)),
        (grid.n_cells,),
    )
    reaction = alpha * state_next.sigma.values

    out: dict[str, tuple[float, float]] = {}
    for name, psi in battery:
        gpsi = g.grad(psi)
        phi_row = float(np.dot(dphi, psi.values)) * vol + g.face_inner(gmu, gpsi)
        flux = 0.0
        for a in range(grid.dim):
            drift = gln.components[a] - params.chi * gphi.components[a]
            flux += float(np.sum(sig_faces.components[a] * drift * gpsi.components[a]))
        sigma_row = (
            float(np.dot(dsig, psi.values)) * vol
            + flux * vol
            - float(np.dot(reaction, psi.values)) * vol
        )
        out[name] = (abs(phi_row), abs(sigma_row))
    return out


def entropy_identity_residual(
    state_prev: State,
    state_next: State,
    tau: float,
    params: ModelParams,
) -> float:
    """Residual of the integrated renormalized entropy identity over one step."""
    if np.min(state_prev.sigma.values) <= 0.0 or np.min(state_next.sigma.values) <= 0.0:
        raise NonpositiveSigma("entropy identity needs strictly positive sigma")
    grid = state_prev.phi.grid
    vol = grid.cell_volume
    ln_prev = np.log(state_prev.sigma.values)
    ln_next = np.log(state_next.sigma.values)
    rate = (float(np.sum(ln_next)) - float(np.sum(ln_prev))) * vol / tau
    gln = g.grad(Field(grid, ln_next))
    gphi = g.grad(state_next.phi)
    grad_sq = g.face_inner(gln, gln)
    cross = g.face_inner(gln, gphi)
    alpha = np.broadcast_to(
        np.asarray(alpha_eval(params.alpha, state_next.phi.values, state_next.sigma.values)),
        (grid.n_cells,),
    )
    rhs = grad_sq - params.chi * cross + float(np.sum(alpha)) * vol
    return abs(rate - rhs)


def energy_law_residual(
    report_prev: EnergyReport,
    report_next: EnergyReport,
    state_next: State,
    tau: float,
    params: ModelParams,
) -> float:
    """Signed residual of the energy-dissipation law over one step:
    [E' - E]/tau + D' - int alpha sigma' (ln sigma' + eps(sigma'-1) + chi(1-phi')).

    Nonpositive values mean the discrete step dissipated at least as much as
    the continuous law requires; the positive part is the quantity that must
    shrink under time refinement.
    """
    sig = state_next.sigma.values
    phi = state_next.phi.values
    alpha = np.broadcast_to(
        np.asarray(alpha_eval(params.alpha, phi, sig)), (sig.size,)
    )
    potential = np.log(sig) + params.eps * (sig - 1.0) + params.chi * (1.0 - phi)
    supply = float(np.sum(alpha * sig * potential)) * state_next.phi.grid.cell_volume
    return (report_next.E_total - report_prev.E_total) / tau + report_next.D - supply


@dataclass(frozen=True)
class StepDiagnostics:
    t: float
    tau: float
    mass_phi_drift: float
    sigma_mass_bracket_excess: float
    min_sigma: float
    phi_bound_margin: float
    energy_law_residual: float
    entropy_identity_residual: float
    newton_iters: int
    zeta_cum: float
    z_cum: float
    weak_eq_residuals: dict | None = None


@dataclass
class DiagnosticsCollector:
    """Step monitor that accumulates per-step diagnostics along a run.

    Feed it to ``solver.run(step_monitor=...)``.  zeta_cum integrates
    |grad ln sigma|^2 in time (the entropy-production tracker) and z_cum
    integrates sigma(ln sigma - 1) + 1 (the energy-correction tracker); both
    use the time-level (n+1) fields.  With collect_weak=True each row also
    carries the weak-formulation residual table against the fixed battery
    (costlier; off by default).
    """

    params: ModelParams
    collect_weak: bool = False
    rows: list[StepDiagnostics] = field(default_factory=list)
    zeta_cum: float = 0.0
    z_cum: float = 0.0
    _last_report: EnergyReport | None = None
    _battery: list | None = None

    def __call__(self, prev: State, new: State, tau: float, newton_iters: int) -> None:
        params = self.params
        grid = prev.phi.grid
        vol = grid.cell_volume
        if self._last_report is None or self._last_report.t != prev.t:
            self._last_report = energy(prev.phi, prev.sigma, params, t=prev.t, mu=prev.mu)
        rep_prev = self._last_report
        rep_new = energy(new.phi, new.sigma, params, t=new.t, mu=new.mu)

        mass_drift = abs(rep_new.mass_phi - rep_prev.mass_phi)
        lo, hi = params.alpha.bounds()
        m_prev = rep_prev.mass_sigma
        m_new = rep_new.mass_sigma
        excess = max(
            math.exp(lo * tau) * m_prev - m_new,
            m_new - math.exp(hi * tau) * m_prev,
            0.0,
        ) / max(m_prev, 1e-300)

        sig = new.sigma.values
        self.zeta_cum += tau * rep_new.grad_ln_sigma_sq
        self.z_cum += tau * (float(np.sum(sig * (np.log(sig) - 1.0))) * vol + grid.volume)

        weak = None
        if self.collect_weak:
            if self._battery is None:
                self._battery = default_test_battery(grid)
            weak = weak_residuals(prev, new, tau, params, self._battery)

        self.rows.append(
            StepDiagnostics(
                t=new.t,
                tau=tau,
                mass_phi_drift=mass_drift,
                sigma_mass_bracket_excess=excess,
                min_sigma=rep_new.min_sigma,
                phi_bound_margin=1.0 - max(abs(rep_new.min_phi), abs(rep_new.max_phi)),
                energy_law_residual=energy_law_residual(rep_prev, rep_new, new, tau, params),
                entropy_identity_residual=entropy_identity_residual(prev, new, tau, params),
                newton_iters=newton_iters,
                zeta_cum=self.zeta_cum,
                z_cum=self.z_cum,
                weak_eq_residuals=weak,
            )
        )
        self._last_report = rep_new

    def row_at(self, t: float, tol: float = 1e-9) -> StepDiagnostics | None:
        """Last step row landing at time t (report rows land exactly)."""
        for row in reversed(self.rows):
            if abs(row.t - t) <= tol * max(1.0, abs(t)):
                return row
        return None

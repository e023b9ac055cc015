"""Time integration of the coupled system by Lie splitting.

Each step advances the phase pair (phi, mu) by a convex-splitting implicit
Euler step (the logarithmic monotone part beta implicit, the expansive
-lam*phi part and the coupling -chi*sigma lagged), then advances sigma by an
implicit Scharfetter-Gummel drift-diffusion step against the fresh phi.  The
splitting buys two structure guarantees that a monolithic solve would have to
fight for:

* the phase step is the Euler-Lagrange system of a strictly convex objective,
  so damped Newton converges globally and the convex part of the energy
  cannot increase;
* the sigma step is an M-matrix system with exponentially fitted fluxes, so
  sigma stays strictly positive and the discrete Gibbs state e^(-w) is an
  exact steady state.

Mass of phi is conserved to roundoff at every Newton iterate (the update
directions have exactly zero cell sum), not merely to the solver tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from . import grid as g
from .errors import (
    ConservationLost,
    NewtonDiverged,
    NonpositiveSigma,
    OutOfDomain,
    PositivityLost,
)
from .functionals import EnergyReport, chemical_potential, energy
from .grid import Field, GridSpec
from .potentials import ModelParams, alpha_eval, beta, beta_prime

__all__ = [
    "State",
    "SolverConfig",
    "StepRecord",
    "RunResult",
    "step_cahn_hilliard",
    "step_sigma",
    "step",
    "run",
    "estimate_T0",
    "sg_flux_norm",
    "relax_sigma_to_steady",
]

# implicit reaction is used wherever tau*alpha stays below this threshold,
# which keeps the column dominance of the sigma system at >= 10%/tau
_IMPLICIT_REACTION_CAP = 0.9


@dataclass
class State:
    """Phase fraction, nutrient concentration and chemical potential at time t."""

    phi: Field
    sigma: Field
    mu: Field
    t: float


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    dt_min: float | None = None
    dt_max: float | None = None
    newton_tol: float = 1e-10
    newton_max_iters: int = 50
    backtrack_factor: float = 0.5
    max_backtracks: int = 30
    krylov_tol: float = 1e-10
    easy_newton_iters: int = 5
    easy_steps_to_grow: int = 3
    growth_factor: float = 1.2

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if self.dt_min is None:
            object.__setattr__(self, "dt_min", self.dt * 2.0**-16)
        if self.dt_max is None:
            object.__setattr__(self, "dt_max", self.dt)
        if not (self.dt_min <= self.dt <= self.dt_max):
            raise ValueError("need dt_min <= dt <= dt_max")


@dataclass(frozen=True)
class StepRecord:
    t_new: float
    dt_used: float
    newton_iters: int
    rejections: int


@dataclass
class RunResult:
    final_state: State
    reports: list[EnergyReport]
    steps: list[StepRecord] = field(default_factory=list)
    status: str = "completed"
    failure_reason: str | None = None
    snapshots: list[State] | None = None


@lru_cache(maxsize=16)
def _operators(grid: GridSpec):
    L = g.neumann_laplacian_matrix(grid)
    return L, (L @ L).tocsr(), sp.identity(grid.n_cells, format="csr")


@lru_cache(maxsize=16)
def _bands_1d(grid: GridSpec):
    """Cached pieces of the 1D Newton matrix I + tau (L^2 - L B) in banded form."""
    n = grid.cells[0]
    h2 = grid.spacing[0] ** 2
    o = 1.0 / h2
    d = np.full(n, -2.0 / h2)
    d[0] = d[-1] = -1.0 / h2
    nbr = np.full(n, 2.0)
    nbr[0] = nbr[-1] = 1.0
    ll_diag = d**2 + nbr * o**2
    return o, d, ll_diag


def _newton_direction_1d(grid: GridSpec, tau: float, bp: np.ndarray, rhs: np.ndarray):
    """Solve (I + tau (L^2 - L diag(bp))) x = rhs with a pentadiagonal solver."""
    n = grid.cells[0]
    o, d, ll_diag = _bands_1d(grid)
    ab = np.zeros((5, n))
    ab[0, 2:] = tau * o * o
    ab[1, 1:] = tau * o * (d[:-1] + d[1:] - bp[1:])
    ab[2, :] = 1.0 + tau * (ll_diag - d * bp)
    ab[3, : n - 1] = tau * o * (d[1:] + d[:-1] - bp[:-1])
    ab[4, : n - 2] = tau * o * o
    return scipy.linalg.solve_banded((2, 2), ab, rhs)


def _norm_h(values: np.ndarray, vol: float) -> float:
    return float(np.sqrt(np.dot(values, values) * vol))


def step_cahn_hilliard(
    state: State,
    sigma_frozen: Field,
    params: ModelParams,
    cfg: SolverConfig,
    tau: float,
) -> tuple[Field, Field, int]:
    """One implicit convex-splitting step for (phi, mu) with sigma frozen.

    Solves  phi' - tau * lap(mu') = phi,  mu' = -lap(phi') + beta(phi')
    - lam*phi - chi*sigma_frozen  by damped Newton on the Schur-reduced
    phi-equation.  Iterates are confined to |phi| <= 1 - delta_safe by the
    backtracking line search.  Returns (phi_new, mu_new, newton_iterations).
    """
    grid = state.phi.grid
    L, LL, I = _operators(grid)
    vol = grid.cell_volume
    phi_n = state.phi.values
    bound = 1.0 - params.delta_safe
    lag = -params.lam * phi_n - params.chi * sigma_frozen.values

    def mu_of(phiv: np.ndarray) -> np.ndarray:
        return -(L @ phiv) + beta(phiv) + lag

    def residual(phiv: np.ndarray) -> np.ndarray:
        return phiv - phi_n - tau * (L @ mu_of(phiv))

    phi = phi_n.copy()
    res = residual(phi)
    norm = _norm_h(res, vol)
    iters = 0
    while norm > cfg.newton_tol:
        if iters >= cfg.newton_max_iters:
            raise NewtonDiverged(
                f"phase Newton stalled at residual {norm:.3e} after {iters} iterations"
            )
        bp = beta_prime(phi)
        if grid.dim == 1:
            direction = _newton_direction_1d(grid, tau, bp, -res)
        else:
            jac = (I + tau * (LL - L.multiply(bp[np.newaxis, :]))).tocsc()
            direction = spla.spsolve(jac, -res)
        scale = 1.0
        for _ in range(cfg.max_backtracks + 1):
            cand = phi + scale * direction
            if np.max(np.abs(cand)) <= bound:
                cand_res = residual(cand)
                cand_norm = _norm_h(cand_res, vol)
                if cand_norm <= (1.0 - 1e-4 * scale) * norm or cand_norm <= cfg.newton_tol:
                    break
            scale *= cfg.backtrack_factor
        else:
            raise NewtonDiverged(
                f"phase Newton line search exhausted {cfg.max_backtracks} halvings "
                f"at residual {norm:.3e}"
            )
        phi, res, norm = cand, cand_res, cand_norm
        iters += 1
    return Field(grid, phi), Field(grid, mu_of(phi)), iters


def _bernoulli(x: np.ndarray) -> np.ndarray:
    """B(x) = x / (e^x - 1), series near zero; always positive."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-8
    xs = x[small]
    out[small] = 1.0 - 0.5 * xs + xs**2 / 12.0
    xl = x[~small]
    out[~small] = xl / np.expm1(xl)
    return out


def _face_pairs(grid: GridSpec, axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Flat cell indices (lo, hi) of the interior faces along one axis."""
    idx = np.arange(grid.n_cells).reshape(grid.shape)
    lo = np.take(idx, range(grid.shape[axis] - 1), axis=axis)
    hi = np.take(idx, range(1, grid.shape[axis]), axis=axis)
    return lo.ravel(), hi.ravel()


def _sg_face_data(
    grid: GridSpec,
    sigma_lag: np.ndarray,
    w: np.ndarray,
    eps: float,
    axis: int,
):
    """Per-face (lo, hi, B(dV), B(-dV), 1/h^2) for the fitted flux along axis."""
    lo, hi = _face_pairs(grid, axis)
    h = grid.spacing[axis]
    if eps > 0.0:
        mob = 1.0 / (1.0 + eps * 0.5 * (sigma_lag[lo] + sigma_lag[hi]))
    else:
        mob = 1.0
    dV = mob * (w[hi] - w[lo])
    return lo, hi, _bernoulli(dV), _bernoulli(-dV), 1.0 / h**2


def step_sigma(
    state: State,
    phi_new: Field,
    params: ModelParams,
    cfg: SolverConfig,
    tau: float,
) -> Field:
    """One implicit Scharfetter-Gummel step for sigma against the fresh phi.

    The face flux discretizes grad(sigma) + sigma * m_eps * grad(w) with
    w = chi * (1 - phi_new) and the mobility factor 1/(1 + eps*sigma) lagged
    at time n and frozen per face.  The reaction alpha(phi_new, sigma_n) is
    taken implicitly at every cell where tau*alpha < 0.9 (all of them for
    nonpositive alpha) and explicitly elsewhere, so the system matrix is an
    M-matrix and the update is strictly positive whenever sigma_n is.
    """
    grid = state.sigma.grid
    sig_n = state.sigma.values
    if np.min(sig_n) <= 0.0:
        raise NonpositiveSigma("sigma step started from a nonpositive state")
    vol_inv = 1.0 / tau
    w = params.chi * (1.0 - phi_new.values)
    alpha = np.asarray(alpha_eval(params.alpha, phi_new.values, sig_n), dtype=float)
    alpha = np.broadcast_to(alpha, sig_n.shape).copy()
    implicit = tau * alpha < _IMPLICIT_REACTION_CAP
    alpha_imp = np.where(implicit, alpha, 0.0)
    alpha_exp = np.where(implicit, 0.0, alpha)

    rhs = sig_n * (vol_inv + alpha_exp)
    if grid.dim == 1:
        n = grid.n_cells
        _lo, _hi, b_plus, b_minus, inv_h2 = _sg_face_data(grid, sig_n, w, params.eps, 0)
        ab = np.zeros((3, n))
        ab[1, :] = vol_inv - alpha_imp
        ab[1, : n - 1] += b_plus * inv_h2
        ab[1, 1:] += b_minus * inv_h2
        ab[0, 1:] = -b_minus * inv_h2
        ab[2, : n - 1] = -b_plus * inv_h2
        sig_new = scipy.linalg.solve_banded((1, 1), ab, rhs)
    else:
        rows, cols, vals = [], [], []
        for axis in range(grid.dim):
            lo, hi, b_plus, b_minus, inv_h2 = _sg_face_data(grid, sig_n, w, params.eps, axis)
            rows.extend([lo, lo, hi, hi])
            cols.extend([hi, lo, hi, lo])
            vals.extend(
                [-b_minus * inv_h2, b_plus * inv_h2, b_minus * inv_h2, -b_plus * inv_h2]
            )
        A_flux = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(grid.n_cells, grid.n_cells),
        )
        M = (A_flux + sp.diags(vol_inv - alpha_imp)).tocsc()
        sig_new = spla.spsolve(M, rhs)
    if np.min(sig_new) <= 0.0 or not np.all(np.isfinite(sig_new)):
        raise PositivityLost(
            f"sigma update lost positivity (min {float(np.min(sig_new)):.3e}); "
            "this indicates a bug or an inadmissible time step"
        )
    return Field(grid, sig_new)


def sg_flux_norm(sigma: Field, phi: Field, params: ModelParams) -> float:
    """Max absolute fitted face flux of sigma against potential chi*(1-phi)."""
    grid = sigma.grid
    w = params.chi * (1.0 - phi.values)
    worst = 0.0
    for axis in range(grid.dim):
        lo, hi, b_plus, b_minus, _ = _sg_face_data(
            grid, sigma.values, w, params.eps, axis
        )
        flux = (b_minus * sigma.values[hi] - b_plus * sigma.values[lo]) / grid.spacing[axis]
        if flux.size:
            worst = max(worst, float(np.max(np.abs(flux))))
    return worst


def step(
    state: State,
    params: ModelParams,
    cfg: SolverConfig,
    tau: float | None = None,
) -> tuple[State, int]:
    """One full Lie-splitting step; returns the new state and Newton iterations.

    mu is recomputed from the fresh (phi, sigma) pair so the stored potential
    satisfies the pointwise constitutive relation at the new time level.
    """
    if tau is None:
        tau = cfg.dt
    phi_new, _mu_scheme, iters = step_cahn_hilliard(state, state.sigma, params, cfg, tau)
    sigma_new = step_sigma(state, phi_new, params, cfg, tau)
    if np.max(np.abs(phi_new.values)) > 1.0 - params.delta_safe:
        raise OutOfDomain("accepted phase state violates the safe bound")
    grid = state.phi.grid
    drift = abs(g.integrate(phi_new) - g.integrate(state.phi))
    if drift > 1e-10 * grid.volume:
        raise ConservationLost(
            f"phase mass drifted by {drift:.3e} in one step (> 1e-10 |domain|)"
        )
    mu_new = chemical_potential(phi_new, sigma_new, params)
    return State(phi_new, sigma_new, mu_new, state.t + tau), iters


def _validate_initial(phi0: Field, sigma0: Field, params: ModelParams) -> None:
    if np.max(np.abs(phi0.values)) > 1.0 - params.delta_safe:
        raise OutOfDomain(
            "initial phase fraction must satisfy |phi| <= "
            f"{1.0 - params.delta_safe:.6f} cellwise"
        )
    mean = float(np.mean(phi0.values))
    if not -1.0 < mean < 1.0:
        raise OutOfDomain(f"initial phase mean {mean} must lie in (-1, 1)")
    if np.min(sigma0.values) <= 0.0:
        raise NonpositiveSigma("initial nutrient concentration must be strictly positive")


def run(
    phi0: Field,
    sigma0: Field,
    params: ModelParams,
    cfg: SolverConfig,
    t_end: float,
    report_every: float,
    step_monitor: Callable[[State, State, float, int], None] | None = None,
    keep_snapshots: bool = False,
) -> RunResult:
    """Advance from the initial data to t_end, reporting at a fixed cadence.

    Steps are clipped so report times (and t_end) are hit exactly; the time
    step halves after a Newton failure and grows by the configured factor
    after a run of easy steps, within [dt_min, dt_max].  Aborts (with a
    partial result) only if Newton fails at dt_min.  Deterministic: repeated
    calls produce identical series.
    """
    _validate_initial(phi0, sigma0, params)
    if report_every <= 0.0:
        raise ValueError("report_every must be positive")
    state = State(phi0.copy(), sigma0.copy(), chemical_potential(phi0, sigma0, params), 0.0)
    reports = [energy(state.phi, state.sigma, params, t=0.0, mu=state.mu)]
    steps: list[StepRecord] = []
    snapshots: list[State] | None = None
    if keep_snapshots:
        snapshots = [State(state.phi.copy(), state.sigma.copy(), state.mu.copy(), 0.0)]
    if t_end <= 0.0:
        return RunResult(state, reports, snapshots=snapshots)

    dt_cur = cfg.dt
    easy_streak = 0
    report_index = 1
    time_scale = max(1.0, t_end)
    tol_t = 1e-12 * time_scale
    while True:
        target = min(report_index * report_every, t_end)
        if target - state.t <= tol_t:
            state.t = target  # snap accumulated roundoff
            reports.append(energy(state.phi, state.sigma, params, t=state.t, mu=state.mu))
            if snapshots is not None:
                snapshots.append(
                    State(state.phi.copy(), state.sigma.copy(), state.mu.copy(), state.t)
                )
            if target >= t_end - tol_t:
                break
            report_index += 1
            continue
        tau = min(dt_cur, target - state.t)
        rejections = 0
        while True:
            try:
                new_state, iters = step(state, params, cfg, tau)
                break
            except NewtonDiverged as exc:
                rejections += 1
                if dt_cur <= cfg.dt_min * (1.0 + 1e-12):
                    return RunResult(
                        state,
                        reports,
                        steps,
                        status="aborted",
                        failure_reason=f"Newton failed at dt_min={cfg.dt_min:g}: {exc}",
                        snapshots=snapshots,
                    )
                dt_cur = max(0.5 * dt_cur, cfg.dt_min)
                tau = min(dt_cur, target - state.t)
        if step_monitor is not None:
            step_monitor(state, new_state, tau, iters)
        steps.append(StepRecord(new_state.t, tau, iters, rejections))
        state = new_state
        if rejections == 0 and iters <= cfg.easy_newton_iters:
            easy_streak += 1
            if easy_streak >= cfg.easy_steps_to_grow:
                dt_cur = min(dt_cur * cfg.growth_factor, cfg.dt_max)
                easy_streak = 0
        else:
            easy_streak = 0
    return RunResult(state, reports, steps, snapshots=snapshots)


def relax_sigma_to_steady(
    phi: Field,
    sigma0: Field,
    params: ModelParams,
    tau: float = 5.0,
    max_steps: int = 2000,
    flux_tol: float = 1e-12,
) -> tuple[Field, float]:
    """Iterate the sigma step with frozen phi until the face flux vanishes.

    Intended for driving sigma to the discrete Gibbs state of the potential
    chi*(1-phi); returns (sigma, final flux norm).
    """
    cfg = SolverConfig(dt=tau)
    state = State(phi, sigma0, phi.grid.zeros(), 0.0)
    norm = sg_flux_norm(state.sigma, phi, params)
    for _ in range(max_steps):
        if norm <= flux_tol:
            break
        state = State(phi, step_sigma(state, phi, params, cfg, tau), state.mu, state.t + tau)
        norm = sg_flux_norm(state.sigma, phi, params)
    return state.sigma, norm


def estimate_T0(
    c: float,
    Y0: float,
    cap: float,
    horizon: float | None = None,
) -> float:
    """First time at which Z' = c (1 + Z^3), Z(0) = Y0 reaches the cap.

    Integrates with an adaptive high-order Runge-Kutta method and a terminal
    event at Z = cap.  Returns math.inf if the integration horizon (default
    4/c, comfortably past the blow-up time) is exhausted first.
    """
    if not c > 0.0:
        raise ValueError("c must be positive")
    if Y0 < 0.0:
        raise ValueError("Y0 must be nonnegative")
    if not cap > Y0:
        return 0.0
    if horizon is None:
        horizon = 4.0 / c

    def rhs(_t, z):
        return c * (1.0 + z**3)

    def hit_cap(_t, z):
        return z[0] - cap

    hit_cap.terminal = True
    hit_cap.direction = 1.0

    sol = solve_ivp(
        rhs,
        (0.0, horizon),
        [float(Y0)],
        method="RK45",
        events=hit_cap,
        rtol=1e-10,
        atol=1e-12,
        dense_output=False,
    )
    if sol.t_events[0].size == 0:
        return math.inf
    return float(sol.t_events[0][0])

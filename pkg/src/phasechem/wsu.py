"""Weak-strong comparison harness.

Pairs a fine reference trajectory with a coarse trajectory of the same
scheme, restricts the fine states to the coarse grid, and evaluates the
relative energy R and relative dissipation W along the pair.  The verdict
checks the contraction prediction: trajectories from shared initial data
must stay within a small multiple of the t=0 restriction-error floor, and
the fitted exponential growth rate of R must respect the configured bound.

The pointwise inequality suite that underpins the contraction proof (the
product estimate with unit phase bound, the square-root/KL comparison, and
the convexity gap of exp(x/2)) is exercised on random admissible tuples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import grid as g
from .errors import IncompatibleGrids
from .functionals import (
    RelEnergyReport,
    relative_energy,
    weak_strong_weight,
)
from .grid import Field, GridSpec
from .potentials import ModelParams, alpha_eval
from .solver import RunResult, SolverConfig, State, run

__all__ = [
    "PairedRunConfig",
    "WsuResult",
    "GronwallVerdict",
    "PointwiseSuiteReport",
    "restrict",
    "run_pair",
    "relative_energy_series",
    "relenin_residuals",
    "gronwall_check",
    "pointwise_inequality_suite",
]

ICGenerator = Callable[[GridSpec], tuple[Field, Field]]


@dataclass(frozen=True)
class PairedRunConfig:
    """Geometry and cadence of a coarse/fine comparison pair.

    The fine grid refines the coarse one by the integer factor ``refine`` on
    every axis, with the fine time step ``dt_coarse / refine`` unless given
    explicitly.  ``sigma_perturb`` multiplies the coarse initial nutrient by
    (1 + sigma_perturb); it exists for negative controls, the floor is always
    computed from the unperturbed pair.
    """

    coarse_cells: tuple[int, ...]
    lengths: tuple[float, ...]
    dt_coarse: float
    t_end: float
    compare_every: float
    refine: int = 4
    dt_fine: float | None = None
    m_override: float | None = None
    gronwall_cmax: float = 50.0
    gronwall_window: tuple[float, float] | None = None
    sigma_perturb: float = 0.0

    def __post_init__(self):
        if self.refine < 1:
            raise ValueError("refine must be >= 1")
        if self.dt_fine is None:
            object.__setattr__(self, "dt_fine", self.dt_coarse / self.refine)

    @property
    def coarse_grid(self) -> GridSpec:
        return GridSpec(self.coarse_cells, self.lengths)

    @property
    def fine_grid(self) -> GridSpec:
        return GridSpec(tuple(n * self.refine for n in self.coarse_cells), self.lengths)


def restrict(fine: Field, coarse: GridSpec) -> Field:
    """Cell-averaging restriction to a coarser grid of the same box.

    Requires every coarse cell count to divide the fine one by a common
    integer factor per axis; preserves the integral exactly.
    """
    fg = fine.grid
    if fg.dim != coarse.dim:
        raise IncompatibleGrids("restriction needs grids of equal dimension")
    for Lf, Lc in zip(fg.lengths, coarse.lengths):
        if abs(Lf - Lc) > 1e-12 * max(Lf, Lc):
            raise IncompatibleGrids("restriction needs identical box lengths")
    factors = []
    for nf, nc in zip(fg.cells, coarse.cells):
        if nf % nc != 0:
            raise IncompatibleGrids(
                f"fine cells {fg.cells} are not an integer refinement of {coarse.cells}"
            )
        factors.append(nf // nc)
    arr = fine.reshaped()
    if fg.dim == 1:
        out = arr.reshape(coarse.cells[0], factors[0]).mean(axis=1)
    else:
        out = arr.reshape(
            coarse.cells[0], factors[0], coarse.cells[1], factors[1]
        ).mean(axis=(1, 3))
    return Field(coarse, out.ravel())


@dataclass
class WsuResult:
    times: np.ndarray
    rel_reports: list[RelEnergyReport]
    M: float
    floor: float
    coarse_states: list[State]
    ref_states: list[State]
    params: ModelParams
    coarse_run: RunResult = field(repr=False, default=None)
    fine_run: RunResult = field(repr=False, default=None)

    @property
    def R(self) -> np.ndarray:
        return np.array([r.R for r in self.rel_reports])

    @property
    def W(self) -> np.ndarray:
        return np.array([r.W for r in self.rel_reports])


def _restriction_floor(
    ic_fn: ICGenerator, pconf: PairedRunConfig, params: ModelParams, M: float
) -> float:
    """Relative energy between the unperturbed coarse IC and the restricted
    fine IC; the irreducible comparison error of the pairing."""
    phi_c, sig_c = ic_fn(pconf.coarse_grid)
    phi_f, sig_f = ic_fn(pconf.fine_grid)
    rep = relative_energy(
        phi_c,
        sig_c,
        restrict(phi_f, pconf.coarse_grid),
        restrict(sig_f, pconf.coarse_grid),
        M,
        recenter=True,
    )
    return rep.R


def run_pair(
    pconf: PairedRunConfig,
    params: ModelParams,
    ic_fn: ICGenerator,
    solver_kwargs: dict | None = None,
) -> WsuResult:
    """Run the coarse and fine trajectories and evaluate R, W at the
    comparison times (the shared report cadence).

    The IC generator is evaluated per grid; the fine trajectory is restricted
    to the coarse grid before comparison and phi differences are re-centered
    to zero mean.  M defaults to max(1, chi^2 * max of the restricted
    reference sigma over the comparison times).
    """
    solver_kwargs = solver_kwargs or {}
    coarse_grid = pconf.coarse_grid
    fine_grid = pconf.fine_grid

    phi_c0, sig_c0 = ic_fn(coarse_grid)
    if pconf.sigma_perturb != 0.0:
        sig_c0 = Field(coarse_grid, sig_c0.values * (1.0 + pconf.sigma_perturb))
    phi_f0, sig_f0 = ic_fn(fine_grid)

    cfg_c = SolverConfig(dt=pconf.dt_coarse, **solver_kwargs)
    cfg_f = SolverConfig(dt=pconf.dt_fine, **solver_kwargs)
    run_c = run(phi_c0, sig_c0, params, cfg_c, pconf.t_end, pconf.compare_every,
                keep_snapshots=True)
    run_f = run(phi_f0, sig_f0, params, cfg_f, pconf.t_end, pconf.compare_every,
                keep_snapshots=True)
    if run_c.status != "completed" or run_f.status != "completed":
        raise RuntimeError(
            f"paired runs did not complete: coarse={run_c.status} "
            f"({run_c.failure_reason}), fine={run_f.status} ({run_f.failure_reason})"
        )

    times_c = np.array([s.t for s in run_c.snapshots])
    times_f = np.array([s.t for s in run_f.snapshots])
    if times_c.size != times_f.size or np.max(np.abs(times_c - times_f)) > 1e-9:
        raise RuntimeError("paired runs reported at different times")

    ref_states = [
        State(
            restrict(s.phi, coarse_grid),
            restrict(s.sigma, coarse_grid),
            restrict(s.mu, coarse_grid),
            s.t,
        )
        for s in run_f.snapshots
    ]
    if pconf.m_override is not None:
        M = pconf.m_override
    else:
        smax = max(float(np.max(s.sigma.values)) for s in ref_states)
        M = weak_strong_weight(params.chi, smax)

    rel_reports = [
        relative_energy(
            c.phi, c.sigma, r.phi, r.sigma, M, t=c.t, recenter=True, params=params
        )
        for c, r in zip(run_c.snapshots, ref_states)
    ]
    floor = _restriction_floor(ic_fn, pconf, params, M)
    return WsuResult(
        times=times_c,
        rel_reports=rel_reports,
        M=M,
        floor=floor,
        coarse_states=run_c.snapshots,
        ref_states=ref_states,
        params=params,
        coarse_run=run_c,
        fine_run=run_f,
    )


def relative_energy_series(result: WsuResult) -> list[RelEnergyReport]:
    return result.rel_reports


def _relenin_rhs(state: State, ref: State, params: ModelParams, M: float) -> float:
    """Right-hand side of the relative energy inequality at one time."""
    grid = state.phi.grid
    vol = grid.cell_volume
    sig, sig_ref = state.sigma.values, ref.sigma.values
    phi, phi_ref = state.phi.values, ref.phi.values
    a = np.broadcast_to(np.asarray(alpha_eval(params.alpha, phi, sig)), sig.shape)
    a_ref = np.broadcast_to(np.asarray(alpha_eval(params.alpha, phi_ref, sig_ref)), sig.shape)
    x = np.log(sig) - np.log(sig_ref)
    kl_cell = sig_ref * (np.expm1(x) - x)
    dphi = phi - phi_ref
    dsig = sig - sig_ref
    total = float(np.sum((a - a_ref) * dsig))
    total += float(np.sum(a_ref * kl_cell))
    total += M * params.chi * float(np.sum(dsig * dphi))
    total += params.lam * M * float(np.sum(dphi**2))
    return total * vol


def relenin_residuals(result: WsuResult) -> np.ndarray:
    """dR/dt + W - RHS along the pair, dR/dt by central differences.

    Endpoints carry nan (no centered difference there).  Nonpositive values
    are consistent with the relative energy inequality; the positive part is
    the discretization defect.
    """
    times = result.times
    R = result.R
    out = np.full(times.size, math.nan)
    for k in range(1, times.size - 1):
        dRdt = (R[k + 1] - R[k - 1]) / (times[k + 1] - times[k - 1])
        rhs = _relenin_rhs(result.coarse_states[k], result.ref_states[k],
                           result.params, result.M)
        out[k] = dRdt + result.rel_reports[k].W - rhs
    return out


@dataclass(frozen=True)
class GronwallVerdict:
    passed: bool
    c_est: float
    max_R: float
    floor: float | None
    max_over_floor: float


def gronwall_check(
    R,
    times,
    c_max: float,
    floor: float | None = None,
    window: tuple[float, float] | None = None,
) -> GronwallVerdict:
    """Fit the largest local exponential growth rate of R and apply the
    contraction verdict.

    c_est is the maximum of ln(R_{k+1}/R_k) / dt over consecutive report
    pairs inside the window whose values both exceed the floor (0 when no
    such pair exists).  The verdict passes when c_est <= c_max and, if a
    floor is supplied (shared-initial-data pairs), max R <= 10 * floor.
    """
    R = np.asarray(R, dtype=float)
    times = np.asarray(times, dtype=float)
    if window is None:
        window = (float(times[0]), float(times[-1]))
    lo, hi = window
    fit_floor = max(floor if floor is not None else 0.0, 1e-300)
    c_est = 0.0
    have_pair = False
    for k in range(times.size - 1):
        if not (lo <= times[k] and times[k + 1] <= hi):
            continue
        if R[k] > fit_floor and R[k + 1] > fit_floor:
            slope = math.log(R[k + 1] / R[k]) / (times[k + 1] - times[k])
            c_est = slope if not have_pair else max(c_est, slope)
            have_pair = True
    in_window = (times >= lo) & (times <= hi)
    max_R = float(np.max(R[in_window])) if np.any(in_window) else 0.0
    ratio = max_R / floor if floor else math.inf if max_R > 0 else 0.0
    passed = bool(c_est <= c_max)
    if floor is not None:
        passed = passed and max_R <= 10.0 * floor
    return GronwallVerdict(
        passed=passed,
        c_est=float(c_est),
        max_R=max_R,
        floor=floor,
        max_over_floor=float(ratio),
    )


@dataclass(frozen=True)
class PointwiseSuiteReport:
    n_samples: int
    violations: int
    min_gaps: dict
    first_violation: tuple | None


def pointwise_inequality_suite(
    n_samples: int = 10**6, seed: int = 0, batch: int = 250_000
) -> PointwiseSuiteReport:
    """Check the three pointwise inequalities of the contraction argument on
    random admissible tuples (|phi|, |phi_ref| < 1; sigma, sigma_ref > 0):

      (a) (sigma - sigma_ref)(phi - phi_ref)
            <= 4 (sigma_ref |phi - phi_ref|^2 + KL(sigma | sigma_ref)),
      (b) (sqrt sigma - sqrt sigma_ref)^2 <= KL(sigma | sigma_ref),
      (c) exp(u/2) - exp(u_ref/2) - (1/2) exp(u_ref/2)(u - u_ref) >= 0,

    where KL(s|r) = s - r - r (ln s - ln r).  The gaps are evaluated exactly
    as stated; a violation is a gap below -1e-12 times its natural scale
    (which absorbs the cancellation noise of nearly equal tuples).
    """
    rng = np.random.default_rng(seed)
    total_viol = 0
    mins = {"product": math.inf, "sqrt_kl": math.inf, "convexity": math.inf}
    first: tuple | None = None
    done = 0
    while done < n_samples:
        m = min(batch, n_samples - done)
        phi = rng.uniform(-1.0, 1.0, m) * (1.0 - 1e-9)
        phi_ref = rng.uniform(-1.0, 1.0, m) * (1.0 - 1e-9)
        u = rng.normal(0.0, 1.5, m)
        u_ref = rng.normal(0.0, 1.5, m)
        sig = np.exp(u)
        sig_ref = np.exp(u_ref)
        kl = sig - sig_ref - sig_ref * (u - u_ref)
        dphi = phi - phi_ref
        dsig = sig - sig_ref

        gap_a = 4.0 * (sig_ref * dphi**2 + kl) - dsig * dphi
        gap_b = kl - (np.sqrt(sig) - np.sqrt(sig_ref)) ** 2
        gap_c = np.exp(0.5 * u) - np.exp(0.5 * u_ref) * (1.0 + 0.5 * (u - u_ref))

        scale = 1.0 + sig + sig_ref
        for name, gap in (("product", gap_a), ("sqrt_kl", gap_b), ("convexity", gap_c)):
            mins[name] = min(mins[name], float(np.min(gap)))
            bad = gap < -1e-12 * scale
            nbad = int(np.count_nonzero(bad))
            total_viol += nbad
            if nbad and first is None:
                i = int(np.argmax(bad))
                first = (name, float(phi[i]), float(phi_ref[i]), float(sig[i]),
                         float(sig_ref[i]), float(gap[i]))
        done += m
    return PointwiseSuiteReport(
        n_samples=n_samples, violations=total_viol, min_gaps=mins, first_violation=first
    )

"""Command-line front end.

Subcommands:

* ``run <config>``: single simulation into a run directory (manifest,
  timeseries.csv, optional snapshots).  Exit 0 on completion, 1 on a config
  or initial-condition error, 2 on an aborted run.
* ``wsu <config>``: paired coarse/fine comparison; writes the R-series CSV
  and a verdict JSON; exit reflects the verdict (0 pass, 2 fail).
* ``sweep <config> --set section.key=v1,v2 ...``: Cartesian product of
  overrides, one run directory per cell plus an aggregate summary CSV.
* ``check``: the property/invariant battery; exit 0 iff all checks pass.

The environment variable PHASECHEM_OUTPUT_ROOT overrides the root under
which relative output directories are created.
"""

from __future__ import annotations

import argparse
import configparser
import io
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import grid as g
from .checks import run_checks
from .config import RunConfig, parse_config, parse_config_file
from .diagnostics import TEST_BATTERY_VERSION, DiagnosticsCollector
from .errors import ConfigError, NonpositiveSigma, OutOfDomain, PhasechemError
from .grid import Field, GridSpec
from .ic import make_phi_ic, make_sigma_ic
from .output import (
    TIMESERIES_SCHEMA,
    write_manifest,
    write_snapshot,
    write_timeseries,
)
from .potentials import gamma_hat
from .solver import run as solver_run
from .wsu import PairedRunConfig, gronwall_check, relenin_residuals, restrict, run_pair

__all__ = ["main"]

WSU_SERIES_SCHEMA = "phasechem-wsu-v1"


def _output_root() -> Path:
    return Path(os.environ.get("PHASECHEM_OUTPUT_ROOT", "."))


def _resolve_run_dir(cfg: RunConfig, config_path: Path, override: str | None) -> Path:
    name = override or cfg.out_dir or (config_path.stem + "_run")
    path = Path(name)
    if not path.is_absolute():
        path = _output_root() / path
    path.mkdir(parents=True, exist_ok=True)
    return path


def _build_ics_on(grid: GridSpec, phi_ic: dict, sigma_ic: dict) -> tuple[Field, Field]:
    phi_kw = {k: v for k, v in phi_ic.items() if k != "type"}
    sig_kw = {k: v for k, v in sigma_ic.items() if k != "type"}
    return (
        make_phi_ic(grid, phi_ic["type"], **phi_kw),
        make_sigma_ic(grid, sigma_ic["type"], **sig_kw),
    )


def _build_ics(cfg: RunConfig) -> tuple[Field, Field]:
    return _build_ics_on(cfg.grid, cfg.phi_ic, cfg.sigma_ic)


def _ic_admissibility(phi0: Field, sigma0: Field, cfg: RunConfig) -> dict:
    """Check the initial-data conditions and report the t=0 integrals.

    Rejects |phi| beyond the safe bound, a phase mean outside (-1, 1), and
    nonpositive sigma; reports the finiteness integrals of sigma_0 and
    ln(sigma_0) alongside."""
    max_abs_phi = float(np.max(np.abs(phi0.values)))
    if max_abs_phi > 1.0 - cfg.delta_safe:
        raise ConfigError(
            f"initial phase fraction reaches |phi| = {max_abs_phi:.8f}; "
            f"cellwise |phi| <= {1.0 - cfg.delta_safe:.8f} is required"
        )
    mean_phi = float(np.mean(phi0.values))
    if not -1.0 < mean_phi < 1.0:
        raise ConfigError(f"initial phase mean {mean_phi} must lie strictly in (-1, 1)")
    min_sigma = float(np.min(sigma0.values))
    if min_sigma <= 0.0:
        raise ConfigError(
            f"initial nutrient concentration must be strictly positive "
            f"(min sigma_0 = {min_sigma:g})"
        )
    sig = sigma0.values
    vol = sigma0.grid.cell_volume
    checks = {
        "mean_phi0": mean_phi,
        "min_sigma0": min_sigma,
        "sigma0_llogl": float(np.sum(sig * np.log1p(sig))) * vol,
        "gamma_hat_ln_sigma0": float(np.sum(gamma_hat(np.log(sig)))) * vol,
    }
    for key, val in checks.items():
        if not math.isfinite(val):
            raise ConfigError(f"initial-data integral {key} is not finite")
    return checks


def _seeds(cfg: RunConfig) -> dict:
    out = {}
    if "seed" in cfg.phi_ic:
        out["phi"] = int(cfg.phi_ic["seed"])
    if "seed" in cfg.sigma_ic:
        out["sigma"] = int(cfg.sigma_ic["seed"])
    return out


def execute_run(cfg: RunConfig, run_dir: Path) -> tuple[int, dict]:
    """Run one configuration into run_dir; returns (exit code, summary)."""
    started = time.time()
    try:
        phi0, sigma0 = _build_ics(cfg)
        ic_checks = _ic_admissibility(phi0, sigma0, cfg)
    except (ConfigError, OutOfDomain, NonpositiveSigma, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        write_manifest(
            run_dir,
            cfg.to_ini(),
            status="config_error",
            failure_reason=str(exc),
            started=started,
            extra={"seeds": _seeds(cfg)},
        )
        return 1, {"status": "config_error"}

    params = cfg.model_params()
    collector = DiagnosticsCollector(params)
    keep_snaps = cfg.snapshot_every > 0
    result = solver_run(
        phi0,
        sigma0,
        params,
        cfg.solver_config(),
        cfg.t_end,
        cfg.report_every,
        step_monitor=collector,
        keep_snapshots=keep_snaps,
    )
    diag_rows = {rep.t: collector.row_at(rep.t) for rep in result.reports}
    write_timeseries(run_dir, result.reports, diag_rows)
    if keep_snaps and result.snapshots:
        ext = "dat" if cfg.snapshot_format == "text" else "bin"
        for i, snap in enumerate(result.snapshots):
            if i % cfg.snapshot_every:
                continue
            for name in cfg.snapshot_fields:
                write_snapshot(
                    run_dir / f"{name}_{i:04d}.{ext}",
                    getattr(snap, name),
                    snap.t,
                    cfg.snapshot_format,
                )
    status = result.status
    write_manifest(
        run_dir,
        cfg.to_ini(),
        status=status,
        failure_reason=result.failure_reason,
        started=started,
        extra={
            "seeds": _seeds(cfg),
            "ic_checks": ic_checks,
            "alpha_bounds": list(params.alpha.bounds()),
            "timeseries_schema": TIMESERIES_SCHEMA,
            "battery_version": TEST_BATTERY_VERSION,
            "n_reports": len(result.reports),
            "n_steps": len(result.steps),
        },
    )
    last = result.reports[-1]
    summary = {
        "status": status,
        "E_total": last.E_total,
        "mass_phi": last.mass_phi,
        "mass_sigma": last.mass_sigma,
        "min_sigma": min(r.min_sigma for r in result.reports),
    }
    if status != "completed":
        print(f"run aborted: {result.failure_reason}", file=sys.stderr)
        return 2, summary
    return 0, summary


def cmd_run(args) -> int:
    config_path = Path(args.config)
    try:
        cfg = parse_config_file(config_path)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    run_dir = _resolve_run_dir(cfg, config_path, args.out)
    code, _ = execute_run(cfg, run_dir)
    if code == 0:
        print(run_dir)
    return code


def _pair_ic_fn(cfg: RunConfig, pconf: PairedRunConfig):
    """Per-grid IC generator for a comparison pair.

    Analytic kinds are evaluated on each grid (their mismatch is the
    restriction-error floor); random kinds are drawn once on the fine grid
    and restricted, since per-grid draws would not share initial data.
    """
    randomish = cfg.phi_ic["type"].startswith("random") or cfg.sigma_ic["type"].startswith(
        "random"
    )
    if not randomish:

        def ic_fn(grid: GridSpec):
            return _build_ics_on(grid, cfg.phi_ic, cfg.sigma_ic)

        return ic_fn

    fine = pconf.fine_grid
    phi_f, sig_f = _build_ics_on(fine, cfg.phi_ic, cfg.sigma_ic)

    def ic_fn(grid: GridSpec):
        if grid == fine:
            return phi_f.copy(), sig_f.copy()
        return restrict(phi_f, grid), restrict(sig_f, grid)

    return ic_fn


def cmd_wsu(args) -> int:
    config_path = Path(args.config)
    try:
        cfg = parse_config_file(config_path)
        if cfg.wsu is None:
            raise ConfigError("wsu runs need a [wsu] section")
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    run_dir = _resolve_run_dir(cfg, config_path, args.out)
    started = time.time()
    pconf = PairedRunConfig(
        coarse_cells=cfg.grid.cells,
        lengths=cfg.grid.lengths,
        dt_coarse=cfg.dt,
        t_end=cfg.t_end,
        compare_every=cfg.report_every,
        refine=cfg.wsu.refine,
        m_override=cfg.wsu.m_override,
        gronwall_cmax=cfg.wsu.cmax,
        sigma_perturb=cfg.wsu.sigma_perturb,
    )
    params = cfg.model_params()
    try:
        ic_fn = _pair_ic_fn(cfg, pconf)
        _ic_admissibility(*ic_fn(pconf.coarse_grid), cfg)
        result = run_pair(pconf, params, ic_fn)
    except (ConfigError, PhasechemError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        write_manifest(run_dir, cfg.to_ini(), status="config_error",
                       failure_reason=str(exc), started=started)
        return 1
    except RuntimeError as exc:
        print(f"wsu pair failed: {exc}", file=sys.stderr)
        write_manifest(run_dir, cfg.to_ini(), status="aborted",
                       failure_reason=str(exc), started=started)
        return 2

    residuals = relenin_residuals(result)
    window = None
    if cfg.wsu.window_lo is not None or cfg.wsu.window_hi is not None:
        window = (
            cfg.wsu.window_lo if cfg.wsu.window_lo is not None else 0.0,
            cfg.wsu.window_hi if cfg.wsu.window_hi is not None else cfg.t_end,
        )
    # the floor comes from the unperturbed shared-IC pairing, so a
    # deliberately perturbed pair fails the 10x-floor contraction rule; for
    # pairs whose initial data coincide exactly after restriction (random
    # kinds) the restriction floor degenerates and the first measured R
    # becomes the comparison scale
    abs_floor = 1e-13 * (1.0 + abs(g.integrate(result.ref_states[0].sigma)))
    if result.floor > abs_floor:
        floor = result.floor
    elif result.R.size > 1:
        floor = max(float(result.R[1]), abs_floor)
    else:
        floor = abs_floor
    verdict = gronwall_check(result.R, result.times, cfg.wsu.cmax, floor=floor, window=window)

    lines = [f"# {WSU_SERIES_SCHEMA}", "t,R,kl_part,v0dual_part,W,relenin_residual"]
    for k, rep in enumerate(result.rel_reports):
        vals = [rep.t, rep.R, rep.kl_sigma, rep.v0dual_part, rep.W, residuals[k]]
        lines.append(",".join(repr(float(v)) for v in vals))
    (run_dir / "wsu_series.csv").write_text("\n".join(lines) + "\n")

    pos = residuals[np.isfinite(residuals)]
    pos = np.maximum(pos, 0.0) if pos.size else np.zeros(1)
    verdict_doc = {
        "passed": bool(verdict.passed),
        "c_est": verdict.c_est,
        "c_max": cfg.wsu.cmax,
        "floor": verdict.floor,
        "max_R": verdict.max_R,
        "max_R_over_floor": verdict.max_over_floor,
        "relenin_pos_max": float(np.max(pos)),
        "relenin_pos_p95": float(np.percentile(pos, 95.0)),
        "M": result.M,
        "refine": pconf.refine,
        "sigma_perturb": pconf.sigma_perturb,
    }
    (run_dir / "verdict.json").write_text(json.dumps(verdict_doc, indent=2, sort_keys=True) + "\n")
    write_manifest(
        run_dir,
        cfg.to_ini(),
        status="completed",
        started=started,
        extra={"verdict": verdict_doc, "series_schema": WSU_SERIES_SCHEMA},
    )
    print(json.dumps(verdict_doc, indent=2, sort_keys=True))
    return 0 if verdict.passed else 2


def _parse_set_args(sets: list[str]) -> list[tuple[str, list[str]]]:
    overrides = []
    for item in sets:
        if "=" not in item:
            raise ConfigError(f"--set needs section.key=v1,v2 form, got {item!r}")
        key, raw = item.split("=", 1)
        if "." not in key:
            raise ConfigError(f"--set key must be section.key, got {key!r}")
        values = [v.strip() for v in raw.split(",") if v.strip()]
        if not values:
            raise ConfigError(f"--set {key} has no values")
        overrides.append((key.strip(), values))
    return overrides


def _apply_overrides(base_text: str, combo: list[tuple[str, str]]) -> RunConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.read_string(base_text)
    for key, value in combo:
        section, option = key.split(".", 1)
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, option, value)
    buf = io.StringIO()
    cp.write(buf)
    return parse_config(buf.getvalue())


def cmd_sweep(args) -> int:
    config_path = Path(args.config)
    try:
        base_text = config_path.read_text()
        base_cfg = parse_config(base_text)
        overrides = _parse_set_args(args.set or [])
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    if overrides:
        keys = [k for k, _ in overrides]
        combos = [list(zip(keys, values)) for values in itertools.product(*(v for _, v in overrides))]
    else:
        keys = []
        combos = [[]]

    sweep_dir = _resolve_run_dir(base_cfg, config_path, args.out or (config_path.stem + "_sweep"))
    cells = []
    for i, combo in enumerate(combos):
        tag = "__".join(f"{k}={v}" for k, v in combo) if combo else "base"
        cell_dir = sweep_dir / f"cell_{i:03d}__{tag}"
        cell_dir.mkdir(parents=True, exist_ok=True)
        cells.append((i, combo, cell_dir))

    def run_cell(cell):
        i, combo, cell_dir = cell
        try:
            cfg = _apply_overrides(base_text, combo)
        except ConfigError as exc:
            print(f"cell {i}: config error: {exc}", file=sys.stderr)
            return i, combo, cell_dir, 1, {"status": "config_error"}
        code, summary = execute_run(cfg, cell_dir)
        return i, combo, cell_dir, code, summary

    workers = max(1, min(len(cells), args.jobs))
    if workers == 1:
        results = [run_cell(c) for c in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_cell, cells))
    results.sort(key=lambda r: r[0])

    header = ["cell", "dir"] + keys + ["status", "exit", "E_total", "mass_phi", "mass_sigma", "min_sigma"]
    lines = ["# phasechem-sweep-v1", ",".join(header)]
    worst = 0
    for i, combo, cell_dir, code, summary in results:
        worst = max(worst, code)
        row = [str(i), cell_dir.name]
        row += [v for _, v in combo]
        row += [
            summary.get("status", "?"),
            str(code),
            repr(summary.get("E_total", math.nan)),
            repr(summary.get("mass_phi", math.nan)),
            repr(summary.get("mass_sigma", math.nan)),
            repr(summary.get("min_sigma", math.nan)),
        ]
        lines.append(",".join(row))
    (sweep_dir / "summary.csv").write_text("\n".join(lines) + "\n")
    print(sweep_dir)
    return 0 if worst == 0 else (2 if worst >= 2 else 1)


def cmd_check(_args) -> int:
    ok = run_checks()
    print("all checks passed" if ok else "CHECK FAILURES", file=sys.stderr)
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="phasechem",
        description="Structure-preserving Cahn-Hilliard / chemotaxis simulator",
    )
    parser.add_argument("--version", action="version", version=f"phasechem {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single simulation")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (overrides config)")
    p_run.set_defaults(func=cmd_run)

    p_wsu = sub.add_parser("wsu", help="paired coarse/fine comparison")
    p_wsu.add_argument("config")
    p_wsu.add_argument("--out", help="output directory (overrides config)")
    p_wsu.set_defaults(func=cmd_wsu)

    p_sweep = sub.add_parser("sweep", help="Cartesian sweep of config overrides")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--set", action="append", metavar="section.key=v1,v2")
    p_sweep.add_argument("--out", help="sweep directory")
    p_sweep.add_argument("--jobs", type=int, default=max(1, min(os.cpu_count() or 1, 4)))
    p_sweep.set_defaults(func=cmd_sweep)

    p_check = sub.add_parser("check", help="run the invariant/property battery")
    p_check.set_defaults(func=cmd_check)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

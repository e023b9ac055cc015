"""Run-directory serialization: manifest, timeseries CSV, field snapshots.

All writers are deterministic: floats are rendered with repr (shortest
round-trip form), so identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import StepDiagnostics
from .functionals import EnergyReport
from .grid import Field, GridSpec

__all__ = [
    "TIMESERIES_SCHEMA",
    "TIMESERIES_COLUMNS",
    "write_manifest",
    "write_timeseries",
    "write_snapshot",
    "read_snapshot",
]

TIMESERIES_SCHEMA = "phasechem-timeseries-v1"
TIMESERIES_COLUMNS = (
    "t",
    "mass_phi",
    "mass_sigma",
    "min_sigma",
    "max_sigma",
    "min_phi",
    "max_phi",
    "E_total",
    "E_dirichlet",
    "E_potential",
    "E_coupling",
    "E_sigma_entropy",
    "E_eps",
    "D",
    "energy_law_residual",
    "entropy_identity_residual",
    "grad_ln_sigma_sq_cum",
    "llogl_beta",
    "ln_sigma_L1",
    "newton_iters",
    "dt_used",
)

SNAPSHOT_MAGIC = b"PCSNAP1\n"


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_manifest(
    run_dir: Path,
    config_text: str,
    status: str,
    failure_reason: str | None = None,
    started: float | None = None,
    finished: float | None = None,
    extra: dict | None = None,
) -> Path:
    manifest = {
        "schema": "phasechem-manifest-v1",
        "code_version": __version__,
        "config": config_text,
        "status": status,
        "failure_reason": failure_reason,
        "started_unix": started,
        "finished_unix": finished if finished is not None else time.time(),
    }
    if extra:
        manifest.update(extra)
    path = Path(run_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def write_timeseries(
    run_dir: Path,
    reports: list[EnergyReport],
    diag_rows: dict[float, StepDiagnostics],
) -> Path:
    """One CSV row per report; diagnostics columns are zero at t = 0 (no step
    has happened yet) and otherwise come from the step landing on the report
    time."""
    lines = [f"# {TIMESERIES_SCHEMA}", ",".join(TIMESERIES_COLUMNS)]
    for rep in reports:
        row = diag_rows.get(rep.t)
        values = [
            rep.t,
            rep.mass_phi,
            rep.mass_sigma,
            rep.min_sigma,
            rep.max_sigma,
            rep.min_phi,
            rep.max_phi,
            rep.E_total,
            rep.dirichlet,
            rep.potential,
            rep.coupling,
            rep.sigma_entropy,
            rep.eps_term,
            rep.D,
            row.energy_law_residual if row else 0.0,
            row.entropy_identity_residual if row else 0.0,
            row.zeta_cum if row else 0.0,
            rep.llogl_beta,
            rep.ln_sigma_L1,
            row.newton_iters if row else 0,
            row.tau if row else 0.0,
        ]
        lines.append(",".join(_fmt(v) for v in values))
    path = Path(run_dir) / "timeseries.csv"
    path.write_text("\n".join(lines) + "\n")
    return path


def write_snapshot(path: Path, field: Field, t: float, fmt: str = "text") -> Path:
    """One field at one time: header (dim, cells, lengths, t) + row-major
    values, as plain text or raw little-endian float64."""
    grid = field.grid
    path = Path(path)
    if fmt == "text":
        lines = [
            "# phasechem-snapshot-v1",
            f"dim {grid.dim}",
            "cells " + " ".join(str(c) for c in grid.cells),
            "lengths " + " ".join(repr(L) for L in grid.lengths),
            f"t {t!r}",
        ]
        lines += [repr(float(v)) for v in field.values]
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(SNAPSHOT_MAGIC)
            fh.write(np.array([grid.dim], dtype="<i8").tobytes())
            fh.write(np.asarray(grid.cells, dtype="<i8").tobytes())
            fh.write(np.asarray(grid.lengths, dtype="<f8").tobytes())
            fh.write(np.array([t], dtype="<f8").tobytes())
            fh.write(field.values.astype("<f8").tobytes())
    else:
        raise ValueError(f"unknown snapshot format {fmt!r}")
    return path


def read_snapshot(path: Path) -> tuple[Field, float]:
    path = Path(path)
    raw = path.read_bytes()
    if raw.startswith(SNAPSHOT_MAGIC):
        off = len(SNAPSHOT_MAGIC)
        dim = int(np.frombuffer(raw, "<i8", 1, off)[0]); off += 8
        cells = tuple(int(c) for c in np.frombuffer(raw, "<i8", dim, off)); off += 8 * dim
        lengths = tuple(float(L) for L in np.frombuffer(raw, "<f8", dim, off)); off += 8 * dim
        t = float(np.frombuffer(raw, "<f8", 1, off)[0]); off += 8
        grid = GridSpec(cells, lengths)
        values = np.frombuffer(raw, "<f8", grid.n_cells, off)
        return Field(grid, values.copy()), t
    lines = raw.decode("utf-8").splitlines()
    if not lines or lines[0] != "# phasechem-snapshot-v1":
        raise ValueError(f"{path} is not a snapshot file")
    dim = int(lines[1].split()[1])
    cells = tuple(int(c) for c in lines[2].split()[1:])
    lengths = tuple(float(L) for L in lines[3].split()[1:])
    t = float(lines[4].split()[1])
    grid = GridSpec(cells, lengths)
    values = np.array([float(v) for v in lines[5 : 5 + grid.n_cells]])
    return Field(grid, values), t

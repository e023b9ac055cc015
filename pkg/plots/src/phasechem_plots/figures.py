"""Figure builders: each consumes parsed series data and writes one image.

Deterministic file names, overwritten on re-run; axes and legends come from
the normative CSV schema, never from free text.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .reader import (
    MissingRunFile,
    Series,
    list_snapshots,
    read_manifest,
    read_series,
    read_snapshot_file,
)

__all__ = ["PlotSpec", "plot_run", "RUN_FIGURES"]

RUN_FIGURES = ("energy", "mass", "positivity", "residuals")


class PlotSpec:
    """What to render: source run directory, figures, output dir, format."""

    def __init__(self, run_dir, out_dir=None, fmt: str = "png", figures=None):
        self.run_dir = Path(run_dir)
        self.out_dir = Path(out_dir) if out_dir else self.run_dir
        if fmt not in ("png", "svg"):
            raise ValueError(f"format must be png or svg, got {fmt!r}")
        self.fmt = fmt
        self.figures = tuple(figures) if figures else None


def _save(fig, path: Path):
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def fig_energy(ts: Series, out: Path, fmt: str) -> Path:
    t = ts["t"]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(t, ts["E_total"], lw=2, color="k", label="E_total")
    for col, style in (
        ("E_dirichlet", "-"),
        ("E_potential", "--"),
        ("E_coupling", "-."),
        ("E_sigma_entropy", ":"),
    ):
        ax.plot(t, ts[col], style, lw=1, label=col)
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend(fontsize=8)
    ax.set_title("free energy and parts")
    return _save(fig, out / f"energy.{fmt}")


def fig_mass(ts: Series, out: Path, fmt: str, alpha_bounds=None) -> Path:
    t = ts["t"]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.4, 4.0))
    ax1.plot(t, ts["mass_phi"], lw=2)
    ax1.set_xlabel("t")
    ax1.set_ylabel("phase mass")
    ax1.set_title("conserved phase mass")
    ax2.plot(t, ts["mass_sigma"], lw=2, color="C1", label="mass_sigma")
    if alpha_bounds is not None:
        lo, hi = alpha_bounds
        m0 = ts["mass_sigma"][0]
        ax2.plot(t, m0 * np.exp(lo * t), "k--", lw=1, label="e^(a_lo t) envelope")
        ax2.plot(t, m0 * np.exp(hi * t), "k:", lw=1, label="e^(a_hi t) envelope")
    ax2.set_xlabel("t")
    ax2.set_ylabel("nutrient mass")
    ax2.set_title("nutrient mass and bracket")
    ax2.legend(fontsize=8)
    return _save(fig, out / f"mass.{fmt}")


def fig_positivity(ts: Series, out: Path, fmt: str) -> Path:
    t = ts["t"]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.semilogy(t, ts["min_sigma"], lw=2, label="min sigma")
    margin = 1.0 - np.maximum(np.abs(ts["min_phi"]), np.abs(ts["max_phi"]))
    ax.semilogy(t, np.maximum(margin, 1e-300), lw=1.5, label="1 - max|phi|")
    ax.set_xlabel("t")
    ax.set_ylabel("positivity margins")
    ax.legend(fontsize=8)
    ax.set_title("minimum principle and phase bound")
    return _save(fig, out / f"positivity.{fmt}")


def fig_residuals(ts: Series, out: Path, fmt: str) -> Path:
    t = ts["t"]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(t, ts["energy_law_residual"], lw=1.5, label="energy-law residual")
    ax.plot(t, ts["entropy_identity_residual"], lw=1.5, label="entropy-identity residual")
    ax.set_xlabel("t")
    ax.set_ylabel("residual")
    ax.set_yscale("symlog", linthresh=1e-12)
    ax.legend(fontsize=8)
    ax.set_title("structure-law residuals per report step")
    return _save(fig, out / f"residuals.{fmt}")


def fig_r_decay(ws: Series, out: Path, fmt: str) -> Path:
    t = ws["t"]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    floor = 1e-300
    ax.semilogy(t, np.maximum(ws["R"], floor), lw=2, color="k", label="R")
    ax.semilogy(t, np.maximum(ws["kl_part"], floor), "--", lw=1.2, label="KL part")
    ax.semilogy(t, np.maximum(ws["v0dual_part"], floor), ":", lw=1.2, label="dual-norm part")
    ax.set_xlabel("t")
    ax.set_ylabel("relative energy")
    ax.legend(fontsize=8)
    ax.set_title("relative energy decay of the coarse/fine pair")
    return _save(fig, out / f"R_decay.{fmt}")


def fig_fields(run_dir: Path, out: Path, fmt: str) -> list[Path]:
    """Heatmaps (2D) or profiles (1D) for each snapshot index present."""
    written = []
    phi_snaps = list_snapshots(run_dir, "phi")
    sigma_snaps = {p.stem.split("_")[1]: p for p in list_snapshots(run_dir, "sigma")}
    for snap in phi_snaps:
        idx = snap.stem.split("_")[1]
        phi, cells, lengths, t = read_snapshot_file(snap)
        pair = sigma_snaps.get(idx)
        ncols = 2 if pair is not None else 1
        fig, axes = plt.subplots(1, ncols, figsize=(4.4 * ncols, 3.6), squeeze=False)
        datasets = [("phi", phi)]
        if pair is not None:
            sigma, *_ = read_snapshot_file(pair)
            datasets.append(("sigma", sigma))
        for ax, (name, values) in zip(axes[0], datasets):
            if len(cells) == 1:
                x = (np.arange(cells[0]) + 0.5) * lengths[0] / cells[0]
                ax.plot(x, values, lw=1.5)
                ax.set_xlabel("x")
            else:
                im = ax.imshow(
                    values.reshape(cells).T,
                    origin="lower",
                    extent=(0, lengths[0], 0, lengths[1]),
                    aspect="auto",
                    cmap="viridis",
                )
                fig.colorbar(im, ax=ax, shrink=0.85)
                ax.set_xlabel("x")
                ax.set_ylabel("y")
            ax.set_title(f"{name} at t = {t:g}")
        written.append(_save(fig, out / f"fields_{idx}.{fmt}"))
    return written


def plot_run(spec: PlotSpec) -> list[Path]:
    """Render the standard figures for one run directory.

    Raises MissingRunFile / MissingColumn on malformed directories.  A WSU
    directory (one containing wsu_series.csv) additionally gets R_decay;
    snapshot files get per-index field figures.
    """
    run_dir = spec.run_dir
    if not run_dir.is_dir():
        raise MissingRunFile(f"not a run directory: {run_dir}")
    out = spec.out_dir
    out.mkdir(parents=True, exist_ok=True)
    wsu_path = run_dir / "wsu_series.csv"
    is_wsu = wsu_path.exists()
    written: list[Path] = []

    wanted = spec.figures or RUN_FIGURES
    if not is_wsu or (run_dir / "timeseries.csv").exists():
        ts = read_series(run_dir / "timeseries.csv")
        alpha_bounds = None
        try:
            manifest = read_manifest(run_dir)
            raw = manifest.get("alpha_bounds")
            if isinstance(raw, (list, tuple)) and len(raw) == 2:
                alpha_bounds = (float(raw[0]), float(raw[1]))
        except MissingRunFile:
            pass
        builders = {
            "energy": lambda: fig_energy(ts, out, spec.fmt),
            "mass": lambda: fig_mass(ts, out, spec.fmt, alpha_bounds),
            "positivity": lambda: fig_positivity(ts, out, spec.fmt),
            "residuals": lambda: fig_residuals(ts, out, spec.fmt),
        }
        for name in wanted:
            if name in builders:
                written.append(builders[name]())
        written.extend(fig_fields(run_dir, out, spec.fmt))
    if is_wsu:
        written.append(fig_r_decay(read_series(wsu_path), out, spec.fmt))
    return written

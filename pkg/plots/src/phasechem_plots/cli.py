"""phasechem-plot: render figures for one or more run directories.

Usage: phasechem-plot RUN_DIR [RUN_DIR ...] [--out DIR] [--format png|svg]

Read-only over the run directories; output file names are deterministic.
Exit 0 when every directory renders, 2 when any fails (missing files or
columns are reported with their names).
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .figures import PlotSpec, plot_run
from .reader import MissingColumn, MissingRunFile

__all__ = ["main"]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="phasechem-plot",
        description="Static figures from phasechem run directories",
    )
    parser.add_argument("run_dirs", nargs="+", metavar="RUN_DIR")
    parser.add_argument("--out", help="output directory (default: the run directory)")
    parser.add_argument("--format", choices=("png", "svg"), default="png")
    parser.add_argument("--version", action="version", version=f"phasechem-plot {__version__}")
    args = parser.parse_args(argv)

    failures = 0
    for run_dir in args.run_dirs:
        try:
            spec = PlotSpec(run_dir, out_dir=args.out, fmt=args.format)
            written = plot_run(spec)
        except (MissingRunFile, MissingColumn, ValueError) as exc:
            print(f"error: {run_dir}: {exc}", file=sys.stderr)
            failures += 1
            continue
        for path in written:
            print(path)
    return 2 if failures else 0


if __name__ == "__main__":
    sys.exit(main())

"""Static figures from phasechem run directories.

This package is a pure consumer of the simulator's documented on-disk
formats (manifest.json, timeseries.csv, wsu_series.csv, snapshot files); it
does not import the simulator.
"""

__version__ = "0.1.0"

from .reader import MissingColumn, MissingRunFile, read_series, read_snapshot_file

__all__ = ["MissingColumn", "MissingRunFile", "read_series", "read_snapshot_file"]

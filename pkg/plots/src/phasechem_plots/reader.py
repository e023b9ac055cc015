"""Readers for the simulator's documented file formats.

timeseries.csv / wsu_series.csv: a `# <schema>` comment line, a header row,
then comma-separated rows; all values numeric.  Snapshot files carry a
(dim, cells, lengths, t) header followed by row-major cell values, either as
plain text or as raw little-endian float64 after the magic ``PCSNAP1\\n``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = [
    "MissingColumn",
    "MissingRunFile",
    "read_series",
    "read_manifest",
    "read_snapshot_file",
    "list_snapshots",
]

SNAPSHOT_MAGIC = b"PCSNAP1\n"


class MissingRunFile(FileNotFoundError):
    """A required run-directory file is absent."""


class MissingColumn(KeyError):
    """The series file lacks a column the figure needs."""

    def __init__(self, column: str, path):
        super().__init__(column)
        self.column = column
        self.path = path

    def __str__(self):
        return f"column {self.column!r} missing from {self.path}"


class Series:
    """Columns of a schema-versioned CSV, addressable by name."""

    def __init__(self, schema: str, columns: dict[str, np.ndarray], path: Path):
        self.schema = schema
        self._columns = columns
        self.path = path

    def __contains__(self, name: str) -> bool:
        return name in self._columns

    def __getitem__(self, name: str) -> np.ndarray:
        if name not in self._columns:
            raise MissingColumn(name, self.path)
        return self._columns[name]

    @property
    def names(self) -> list[str]:
        return list(self._columns)


def read_series(path) -> Series:
    path = Path(path)
    if not path.exists():
        raise MissingRunFile(f"missing series file: {path}")
    lines = path.read_text().splitlines()
    if len(lines) < 2 or not lines[0].startswith("#"):
        raise ValueError(f"{path} does not start with a schema comment line")
    schema = lines[0].lstrip("# ").strip()
    header = lines[1].split(",")
    data = [[] for _ in header]
    for line in lines[2:]:
        if not line.strip():
            continue
        parts = line.split(",")
        for store, raw in zip(data, parts):
            store.append(float(raw))
    columns = {name: np.asarray(vals) for name, vals in zip(header, data)}
    return Series(schema, columns, path)


def read_manifest(run_dir) -> dict:
    path = Path(run_dir) / "manifest.json"
    if not path.exists():
        raise MissingRunFile(f"missing manifest: {path}")
    return json.loads(path.read_text())


def read_snapshot_file(path):
    """Returns (values row-major, cells, lengths, t)."""
    path = Path(path)
    raw = path.read_bytes()
    if raw.startswith(SNAPSHOT_MAGIC):
        off = len(SNAPSHOT_MAGIC)
        dim = int(np.frombuffer(raw, "<i8", 1, off)[0]); off += 8
        cells = tuple(int(c) for c in np.frombuffer(raw, "<i8", dim, off)); off += 8 * dim
        lengths = tuple(float(x) for x in np.frombuffer(raw, "<f8", dim, off)); off += 8 * dim
        t = float(np.frombuffer(raw, "<f8", 1, off)[0]); off += 8
        n = int(np.prod(cells))
        values = np.frombuffer(raw, "<f8", n, off).copy()
        return values, cells, lengths, t
    lines = raw.decode("utf-8").splitlines()
    if not lines or not lines[0].startswith("# phasechem-snapshot"):
        raise ValueError(f"{path} is not a snapshot file")
    cells = tuple(int(c) for c in lines[2].split()[1:])
    lengths = tuple(float(x) for x in lines[3].split()[1:])
    t = float(lines[4].split()[1])
    n = int(np.prod(cells))
    values = np.array([float(v) for v in lines[5 : 5 + n]])
    return values, cells, lengths, t


def list_snapshots(run_dir, field: str) -> list[Path]:
    run_dir = Path(run_dir)
    return sorted(run_dir.glob(f"{field}_*.dat")) + sorted(run_dir.glob(f"{field}_*.bin"))

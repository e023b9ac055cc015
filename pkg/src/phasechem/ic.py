"""Initial-condition generators addressed by run configurations.

Every generator is deterministic given its parameters (random kinds take an
explicit seed), and produces admissible fields: |phi| strictly inside the
safe box and sigma strictly positive.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .grid import Field, GridSpec

__all__ = ["PHI_KINDS", "SIGMA_KINDS", "make_phi_ic", "make_sigma_ic"]

PHI_KINDS = ("constant", "random_perturbation", "tanh_interface")
SIGMA_KINDS = ("constant", "gaussian_bump", "random_positive")


def make_phi_ic(grid: GridSpec, kind: str, **kw) -> Field:
    if kind == "constant":
        return grid.full(float(kw.get("value", 0.0)))
    if kind == "random_perturbation":
        amplitude = float(kw.get("amplitude", 0.1))
        mean = float(kw.get("mean", 0.0))
        seed = int(kw.get("seed", 0))
        rng = np.random.default_rng(seed)
        vals = mean + amplitude * (2.0 * rng.random(grid.n_cells) - 1.0)
        return Field(grid, vals)
    if kind == "tanh_interface":
        center = float(kw.get("center", grid.lengths[0] / 2.0))
        width = float(kw.get("width", 0.1))
        if width <= 0.0:
            raise ConfigError("tanh_interface width must be positive")
        x = grid.cell_centers()[0]
        return Field(grid, np.tanh((x - center) / width))
    raise ConfigError(f"unknown phi initial condition {kind!r}")


def make_sigma_ic(grid: GridSpec, kind: str, **kw) -> Field:
    if kind == "constant":
        return grid.full(float(kw.get("value", 1.0)))
    if kind == "gaussian_bump":
        # bump over a 5% pedestal, normalized so the total mass is as requested
        center = float(kw.get("center", grid.lengths[0] / 2.0))
        width = float(kw.get("width", 0.1))
        mass = float(kw.get("mass", grid.volume))
        if width <= 0.0 or mass <= 0.0:
            raise ConfigError("gaussian_bump needs positive width and mass")
        coords = grid.cell_centers()
        d2 = (coords[0] - center) ** 2
        if grid.dim == 2:
            center_y = float(kw.get("center_y", grid.lengths[1] / 2.0))
            d2 = d2 + (coords[1] - center_y) ** 2
        shape = 0.05 + np.exp(-d2 / (2.0 * width**2))
        vals = mass * shape / (np.sum(shape) * grid.cell_volume)
        return Field(grid, vals)
    if kind == "random_positive":
        floor = float(kw.get("floor", 0.1))
        seed = int(kw.get("seed", 0))
        if floor <= 0.0:
            raise ConfigError("random_positive floor must be positive")
        rng = np.random.default_rng(seed)
        return Field(grid, floor + rng.random(grid.n_cells))
    raise ConfigError(f"unknown sigma initial condition {kind!r}")

"""Uniform cell-centered finite-volume grid with homogeneous-Neumann calculus.

Cells are the midpoints of a uniform box partition in 1D or 2D.  Gradients
live on interior faces; boundary faces carry zero flux by construction, which
makes every divergence (and hence the Laplacian) conserve the cell sum
exactly.  `laplacian` is literally `div(grad(.))`, so that identity holds
bitwise, and summation by parts

    <div J, v>_cells = -<J, grad v>_faces

holds to roundoff with the face quadrature weight equal to the cell volume.

All operations are pure functions of their inputs and safe to call
concurrently on distinct fields; reductions use numpy's fixed summation
order, so results do not depend on caller parallelism.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import NonZeroMean, SolverDiverged

__all__ = [
    "GridSpec",
    "Field",
    "FaceField",
    "grad",
    "div",
    "laplacian",
    "integrate",
    "inner",
    "face_inner",
    "inv_neumann_laplacian",
    "v0dual_norm_sq",
    "neumann_laplacian_matrix",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform cell-centered grid on a box, dim 1 or 2.

    cells and lengths are per-axis; spacing is ``lengths[a] / cells[a]``.
    """

    cells: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        cells = tuple(int(n) for n in self.cells)
        lengths = tuple(float(L) for L in self.lengths)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "lengths", lengths)
        if len(cells) not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {len(cells)}")
        if len(lengths) != len(cells):
            raise ValueError("cells and lengths must have the same dimension")
        if any(n <= 0 for n in cells):
            raise ValueError(f"cells must be positive, got {cells}")
        if any(not (L > 0.0) for L in lengths):
            raise ValueError(f"lengths must be positive, got {lengths}")

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells

    @property
    def n_cells(self) -> int:
        n = 1
        for c in self.cells:
            n *= c
        return n

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.cells))

    @property
    def cell_volume(self) -> float:
        v = 1.0
        for h in self.spacing:
            v *= h
        return v

    @property
    def volume(self) -> float:
        v = 1.0
        for L in self.lengths:
            v *= L
        return v

    def axis_centers(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def cell_centers(self) -> list[np.ndarray]:
        """Per-axis coordinates of every cell, each flat of length n_cells."""
        axes = [self.axis_centers(a) for a in range(self.dim)]
        if self.dim == 1:
            return [axes[0].copy()]
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        return [X.ravel(), Y.ravel()]

    def field(self, values) -> "Field":
        return Field(self, np.asarray(values, dtype=float).ravel())

    def full(self, value: float) -> "Field":
        return Field(self, np.full(self.n_cells, float(value)))

    def zeros(self) -> "Field":
        return Field(self, np.zeros(self.n_cells))


@dataclass
class Field:
    """Cell values on a GridSpec, stored flat in C (row-major) order."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.values.size != self.grid.n_cells:
            raise ValueError(
                f"field has {self.values.size} values, grid has {self.grid.n_cells} cells"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    def reshaped(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def copy(self) -> "Field":
        return Field(self.grid, self.values.copy())


@dataclass
class FaceField:
    """One value per interior face, per axis; boundary fluxes are implicitly zero."""

    grid: GridSpec
    components: tuple[np.ndarray, ...] = field(repr=False)

    def __post_init__(self):
        if len(self.components) != self.grid.dim:
            raise ValueError("one component array per axis required")
        comps = []
        for a, comp in enumerate(self.components):
            expected = _face_shape(self.grid, a)
            comp = np.asarray(comp, dtype=float)
            if comp.shape != expected:
                raise ValueError(
                    f"axis-{a} faces have shape {comp.shape}, expected {expected}"
                )
            comps.append(comp)
        self.components = tuple(comps)


def _face_shape(grid: GridSpec, axis: int) -> tuple[int, ...]:
    shape = list(grid.shape)
    shape[axis] -= 1
    return tuple(shape)


def grad(u: Field) -> FaceField:
    """Face-centered gradient: difference of adjacent cells over the spacing."""
    arr = u.reshaped()
    comps = []
    for a in range(u.grid.dim):
        comps.append(np.diff(arr, axis=a) / u.grid.spacing[a])
    return FaceField(u.grid, tuple(comps))


def div(J: FaceField) -> Field:
    """Cell-centered divergence of interior-face fluxes; boundary flux is zero."""
    grid = J.grid
    out = np.zeros(grid.shape)
    for a in range(grid.dim):
        comp = J.components[a]
        pad = [(0, 0)] * grid.dim
        pad[a] = (1, 1)
        padded = np.pad(comp, pad)
        out += np.diff(padded, axis=a) / grid.spacing[a]
    return Field(grid, out.ravel())


def laplacian(u: Field) -> Field:
    """Neumann Laplacian (mirrored ghost cells); identical to div(grad(u))."""
    return div(grad(u))


def integrate(u: Field) -> float:
    """Midpoint quadrature of the cell field over the whole box."""
    return float(np.sum(u.values) * u.grid.cell_volume)


def inner(u: Field, v: Field) -> float:
    if u.grid is not v.grid and u.grid != v.grid:
        raise ValueError("inner product requires matching grids")
    return float(np.dot(u.values, v.values) * u.grid.cell_volume)


def face_inner(J: FaceField, K: FaceField) -> float:
    """Face quadrature pairing; each interior face carries one cell volume."""
    s = 0.0
    for a in range(J.grid.dim):
        s += float(np.dot(J.components[a].ravel(), K.components[a].ravel()))
    return s * J.grid.cell_volume


def _cell_mean(u: Field) -> float:
    return float(np.mean(u.values))


def inv_neumann_laplacian(
    f: Field,
    rel_tol: float = 1e-10,
    max_iters: int | None = None,
) -> Field:
    """Solve -laplacian(u) = f for the zero-mean u, by conjugate gradients.

    f must have zero cell mean (the Neumann operator's compatibility
    condition); the right-hand side and every iterate are projected back onto
    the zero-mean subspace so the kernel never pollutes the solve.

    Raises NonZeroMean if |mean f| exceeds 1e-10 times the RMS of f, and
    SolverDiverged if the relative residual does not reach rel_tol within
    max_iters (default 10 * n_cells) iterations.
    """
    grid = f.grid
    rms = float(np.sqrt(np.mean(f.values**2)))
    mean = _cell_mean(f)
    if abs(mean) > 1e-10 * rms:
        raise NonZeroMean(
            f"right-hand side has cell mean {mean:.3e} (rms {rms:.3e}); "
            "the Neumann inverse needs a zero-mean source"
        )
    if rms == 0.0:
        return grid.zeros()
    if max_iters is None:
        max_iters = 10 * grid.n_cells

    b = f.values - mean
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rr = float(np.dot(r, r))
    stop = (rel_tol * float(np.linalg.norm(b))) ** 2
    for _ in range(max_iters):
        if rr <= stop:
            break
        Ap = -laplacian(Field(grid, p)).values
        Ap -= np.mean(Ap)
        alpha = rr / float(np.dot(p, Ap))
        x += alpha * p
        r -= alpha * Ap
        # re-project to kill accumulated roundoff in the kernel direction
        x -= np.mean(x)
        r -= np.mean(r)
        rr_new = float(np.dot(r, r))
        p = r + (rr_new / rr) * p
        rr = rr_new
    else:
        raise SolverDiverged(
            f"CG for the Neumann inverse stalled at relative residual "
            f"{np.sqrt(rr) / np.linalg.norm(b):.3e} after {max_iters} iterations"
        )
    return Field(grid, x)


def v0dual_norm_sq(f: Field, rel_tol: float = 1e-10) -> float:
    """Squared dual norm <f, (-lap)^(-1) f> of a zero-mean field."""
    u = inv_neumann_laplacian(f, rel_tol=rel_tol)
    return inner(f, u)


def neumann_laplacian_matrix(grid: GridSpec) -> sp.csr_matrix:
    """Sparse matrix of the same Neumann Laplacian (for implicit solves)."""

    def lap1d(n: int, h: float) -> sp.csr_matrix:
        if n == 1:
            return sp.csr_matrix((1, 1))
        main = np.full(n, -2.0)
        main[0] = main[-1] = -1.0
        off = np.ones(n - 1)
        return sp.diags([off, main, off], [-1, 0, 1], format="csr") / h**2

    hx = grid.spacing[0]
    Lx = lap1d(grid.cells[0], hx)
    if grid.dim == 1:
        return Lx.tocsr()
    hy = grid.spacing[1]
    Ly = lap1d(grid.cells[1], hy)
    Ix = sp.identity(grid.cells[0], format="csr")
    Iy = sp.identity(grid.cells[1], format="csr")
    return (sp.kron(Lx, Iy) + sp.kron(Ix, Ly)).tocsr()

"""Cubic lattice geometry on the unit cube.

The domain [0,1]^d is split into N^d closed cells of side h = 1/N.  Cells are
addressed by multi-indices (j_1, ..., j_d) with each coordinate in 1..N, or by
a flat index in 0..N^d-1 with coordinate 1 varying fastest.  The flat order is
fixed once and for all so that snapshot files are bit-stable; it coincides with
Fortran ravel order of the (N, ..., N) field array.

Densities are plain float64 arrays of length N^d in flat order, normalized so
that h^d * sum(U) = 1.  Two cells are neighbors when their multi-indices differ
by one in exactly one coordinate; there is no periodic wraparound, which is how
the no-flux boundary enters every operator built downstream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

__all__ = [
    "Grid",
    "flat_index",
    "multi_index",
    "neighbors",
    "edge_list",
    "edge_count",
    "as_field",
    "as_flat",
    "cell_centers_1d",
    "discretize",
    "require_density",
    "require_positive",
]


@dataclass(frozen=True)
class Grid:
    """d-dimensional lattice with N cells per direction."""

    d: int
    n: int

    def __post_init__(self) -> None:
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.n < 2:
            raise ValueError(f"cells per direction must be >= 2, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d


def _check_multi(grid: Grid, i: Sequence[int]) -> tuple[int, ...]:
    i = tuple(int(c) for c in i)
    if len(i) != grid.d:
        raise ValueError(f"index {i} has {len(i)} coordinates, grid has d={grid.d}")
    for c in i:
        if not 1 <= c <= grid.n:
            raise ValueError(f"index {i} outside 1..{grid.n}")
    return i


def flat_index(grid: Grid, i: Sequence[int]) -> int:
    """Flat position of a multi-index; coordinate 1 fastest."""
    i = _check_multi(grid, i)
    flat = 0
    for c in reversed(i):
        flat = flat * grid.n + (c - 1)
    return flat


def multi_index(grid: Grid, flat: int) -> tuple[int, ...]:
    """Inverse of :func:`flat_index`."""
    if not 0 <= flat < grid.size:
        raise ValueError(f"flat index {flat} outside 0..{grid.size - 1}")
    out = []
    for _ in range(grid.d):
        out.append(flat % grid.n + 1)
        flat //= grid.n
    return tuple(out)


def neighbors(grid: Grid, i: Sequence[int]) -> list[tuple[int, ...]]:
    """Lattice points at distance one from i, in axis order, minus before plus."""
    i = _check_multi(grid, i)
    out = []
    for k in range(grid.d):
        for step in (-1, +1):
            c = i[k] + step
            if 1 <= c <= grid.n:
                out.append(i[:k] + (c,) + i[k + 1 :])
    return out


def edge_count(grid: Grid) -> int:
    return grid.d * grid.n ** (grid.d - 1) * (grid.n - 1)


def edge_list(grid: Grid) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Each unordered neighbor pair exactly once, grouped by axis."""
    out = []
    for k in range(grid.d):
        for flat in range(grid.size):
            i = multi_index(grid, flat)
            if i[k] < grid.n:
                j = i[:k] + (i[k] + 1,) + i[k + 1 :]
                out.append((i, j))
    return out


def as_field(grid: Grid, values: np.ndarray) -> np.ndarray:
    """View flat values as the (N, ..., N) field with axis k for coordinate k+1."""
    return np.asarray(values).reshape(grid.shape, order="F")


def as_flat(grid: Grid, field: np.ndarray) -> np.ndarray:
    return np.asarray(field).ravel(order="F")


def cell_centers_1d(grid: Grid) -> np.ndarray:
    return (np.arange(grid.n) + 0.5) * grid.h


def _gauss_points_1d(grid: Grid, order: int) -> tuple[np.ndarray, np.ndarray]:
    # Nodes on [0,1] per cell, weights summing to 1 so averages come out directly.
    t, w = leggauss(order)
    ref = 0.5 * (t + 1.0)
    offsets = np.arange(grid.n) * grid.h
    nodes = (offsets[:, None] + grid.h * ref[None, :]).ravel()
    return nodes, 0.5 * w


def discretize(
    grid: Grid,
    f: Callable[..., np.ndarray],
    quadrature_order: int = 5,
) -> tuple[np.ndarray, float]:
    """Embed a continuous field as a density of exact unit mass.

    f is evaluated as f(x1, ..., xd) on broadcast coordinate arrays.  Each cell
    receives its tensorized Gauss-Legendre average, and the whole field is then
    rescaled so that h^d * sum(U) = 1.  Returns (U, scale) with U = scale * averages.
    """
    if quadrature_order < 1:
        raise ValueError("quadrature order must be >= 1")
    nodes, w = _gauss_points_1d(grid, quadrature_order)
    q = len(w)
    grids = np.meshgrid(*([nodes] * grid.d), indexing="ij", sparse=True)
    vals = np.asarray(f(*grids), dtype=float)
    vals = np.broadcast_to(vals, (grid.n * q,) * grid.d)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValueError("field must be nonnegative and finite on [0,1]^d")
    # Contract the quadrature axis of each direction in turn; after step k the
    # next interleaved q axis sits at position k+1.
    avg = vals.reshape(sum(((grid.n, q) for _ in range(grid.d)), ()))
    for k in range(grid.d):
        avg = np.tensordot(avg, w, axes=([k + 1], [0]))
    # Axes are now (n,)*d with axis k for coordinate k+1.
    mass = float(grid.cell_volume * avg.sum())
    if mass <= 0.0:
        raise ValueError("field integrates to zero; cannot normalize")
    scale = 1.0 / mass
    return as_flat(grid, np.ascontiguousarray(avg, dtype=float) * scale), scale


def require_density(grid: Grid, U: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    if U.shape != (grid.size,):
        raise ValueError(f"density has shape {U.shape}, expected ({grid.size},)")
    mass = grid.cell_volume * float(U.sum())
    if abs(mass - 1.0) > tol:
        raise ValueError(f"density mass {mass} deviates from 1 by more than {tol}")
    return U


def require_positive(grid: Grid, U: np.ndarray) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    if U.shape != (grid.size,):
        raise ValueError(f"array has shape {U.shape}, expected ({grid.size},)")
    if not np.all(U > 0.0):
        raise ValueError("density must be strictly positive")
    return U

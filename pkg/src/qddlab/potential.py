"""Product potentials, their cell averages, and the discrete steady state.

A potential on [0,1]^d is a sum V(x) = V1(x_1) + ... + Vd(x_d) of one
dimensional pieces.  Each piece is either quadratic, V(x) = (lam/2)(x - xbar)^2
with lam >= 0, or a table of N cell averages carrying a declared convexity
modulus (the library never infers convexity from a table).

The discrete steady state is built per direction from the cell averages V_j:

    factor_j = exp(-V_j) / Z_h,      Z_h = h * sum_j exp(-V_j),

and assembled as the elementwise product over directions.  Alongside it we keep
the entropy offset gamma_h = sum_k log(Z_k / Z_h_k) >= 0 relating the discrete
relative entropy to its continuous counterpart (Z_k is the continuous
normalization, integrated by composite Gauss-Legendre of order 10 per cell),
and the discrete convexity modulus lambda_h.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from numpy.polynomial.legendre import leggauss

from .grid import Grid, as_flat

__all__ = [
    "Quadratic",
    "Tabulated",
    "Potential1D",
    "cell_averages",
    "lambda_h",
    "steady_state",
    "SteadyState",
    "w_from_v",
]

# exp(-V) overflows double precision near |V| ~ 709; refuse earlier with advice.
_EXP_GUARD = 700.0


@dataclass(frozen=True)
class Quadratic:
    """V(x) = (lam/2)(x - xbar)^2 with convexity modulus lam >= 0."""

    lam: float
    xbar: float = 0.5

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ValueError(f"quadratic convexity parameter must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class Tabulated:
    """N cell averages with a declared (not inferred) convexity modulus."""

    cell_values: tuple[float, ...]
    lam: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "cell_values", tuple(float(v) for v in self.cell_values))


Potential1D = Union[Quadratic, Tabulated]


def cell_averages(pot: Potential1D, grid: Grid) -> np.ndarray:
    """The N per-cell averages (1/h) * integral of V over each cell."""
    if isinstance(pot, Quadratic):
        # (1/h) int (lam/2)(x-c)^2 dx = (lam/6h) [(b-c)^3 - (a-c)^3]
        edges = np.arange(grid.n + 1) * grid.h - pot.xbar
        cubes = edges**3
        return (pot.lam / (6.0 * grid.h)) * (cubes[1:] - cubes[:-1])
    if isinstance(pot, Tabulated):
        if len(pot.cell_values) != grid.n:
            raise ValueError(
                f"table has {len(pot.cell_values)} entries, grid needs {grid.n}"
            )
        return np.array(pot.cell_values, dtype=float)
    raise TypeError(f"unsupported potential {type(pot).__name__}")


def lambda_h(lam: float, h: float) -> float:
    """Discrete convexity modulus (2/h^2)(1 - exp(-h^2 lam / 2))."""
    if h <= 0:
        raise ValueError("h must be positive")
    return (2.0 / h**2) * (-math.expm1(-0.5 * h**2 * lam))


def _continuous_z(pot: Potential1D, grid: Grid, order: int = 10) -> float:
    """int_0^1 exp(-V), composite Gauss-Legendre per cell.

    A table has no continuous extension beyond its own piecewise constant, so
    its continuous and discrete normalizations coincide by definition.
    """
    if isinstance(pot, Tabulated):
        vals = cell_averages(pot, grid)
        return grid.h * float(np.exp(-vals).sum())
    if pot.lam == 0.0:
        return grid.h * grid.n  # flat factor: make gamma an exact zero
    t, w = leggauss(order)
    ref = 0.5 * (t + 1.0)
    nodes = (np.arange(grid.n)[:, None] * grid.h + grid.h * ref[None, :]).ravel()
    weights = np.tile(0.5 * w * grid.h, grid.n)
    v = 0.5 * pot.lam * (nodes - pot.xbar) ** 2
    return float(np.dot(weights, np.exp(-v)))


@dataclass(frozen=True)
class SteadyState:
    """Product steady state with its 1-D factors and diagnostic constants."""

    grid: Grid
    factors: tuple[np.ndarray, ...]
    values: np.ndarray
    z_h: tuple[float, ...]
    gamma_h: float
    lambda_h: float

    @property
    def h(self) -> float:
        return self.grid.h


def steady_state(pots: Sequence[Potential1D], grid: Grid) -> SteadyState:
    if len(pots) != grid.d:
        raise ValueError(f"{len(pots)} potentials for a d={grid.d} grid")
    factors = []
    z_h = []
    gamma = 0.0
    for pot in pots:
        v = cell_averages(pot, grid)
        if np.max(np.abs(v)) > _EXP_GUARD:
            raise OverflowError(
                "potential cell average exceeds the exp() range; shift V by a "
                "constant (the steady state is shift invariant)"
            )
        w = np.exp(-v)
        z = grid.h * float(w.sum())
        factor = w / z
        factor.flags.writeable = False
        factors.append(factor)
        z_h.append(z)
        gamma += math.log(_continuous_z(pot, grid)) - math.log(z)
    values = as_flat(grid, functools.reduce(np.multiply.outer, factors))
    values.flags.writeable = False
    lam_min = min(pot.lam for pot in pots)
    return SteadyState(
        grid=grid,
        factors=tuple(factors),
        values=values,
        z_h=tuple(z_h),
        gamma_h=gamma,
        lambda_h=lambda_h(lam_min, grid.h),
    )


def w_from_v(pots: Sequence[Potential1D]) -> Callable[..., np.ndarray]:
    """The confinement W = |grad V|^2 - 2 lap V of the fourth-order flow.

    Only available for quadratic pieces, where W(x) = sum_k lam_k^2 (x_k -
    xbar_k)^2 - 2 sum_k lam_k in closed form.
    """
    for pot in pots:
        if not isinstance(pot, Quadratic):
            raise NotImplementedError("W from V needs the smooth (quadratic) form")
    lams = [p.lam for p in pots]
    xbars = [p.xbar for p in pots]
    const = -2.0 * sum(lams)

    def w(*xs: np.ndarray) -> np.ndarray:
        if len(xs) != len(lams):
            raise ValueError(f"expected {len(lams)} coordinates, got {len(xs)}")
        total = sum(
            (lam**2) * (np.asarray(x) - xb) ** 2 for lam, xb, x in zip(lams, xbars, xs)
        )
        return total + const

    return w

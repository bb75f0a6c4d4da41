"""Entropy, Fisher information, their derivatives, and decay diagnostics.

Conventions fixed here once and used everywhere else:

* H(U) = h^d sum U_j log(U_j / Pi_j).  This vanishes at the steady state; the
  constant gamma_h relating it to the continuous entropy lives on SteadyState
  and is reported separately, never added back in.
* The Fisher information has two algebraically equal forms; ``fisher`` is the
  quadratic one in log-ratio differences, ``fisher_alt`` pairs plain ratio
  differences with log-ratio differences.  Keeping both routes alive is the
  point: their agreement is a nontrivial consistency check on the log mean.
* ``fisher_gradient`` returns S with DI = -S up to an additive constant, so the
  steepest-descent flow of I reads dU/dt = onsager_apply(U, S).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import as_field, require_positive
from .markov import Generator
from .metric import _axis_slices, edge_weights
from .potential import SteadyState

__all__ = [
    "entropy",
    "entropy_gradient",
    "fisher",
    "fisher_alt",
    "fisher_gradient",
    "entropy_hessian_form",
    "fisher_hessian_form",
    "cdi_margin",
    "FunctionalReport",
    "functional_report",
]


def entropy(U, steady: SteadyState) -> float:
    grid = steady.grid
    U = require_positive(grid, U)
    return grid.cell_volume * float(np.sum(U * np.log(U / steady.values)))


def entropy_gradient(U, steady: SteadyState) -> np.ndarray:
    U = require_positive(steady.grid, U)
    return 1.0 + np.log(U / steady.values)


def fisher(U, steady: SteadyState) -> float:
    """h^{d-2} sum over edges of sqrt(Pi_i Pi_j) Lambda_ij (log r_i - log r_j)^2."""
    grid = steady.grid
    U = require_positive(grid, U)
    lr = as_field(grid, np.log(U / steady.values))
    weights = edge_weights(U, steady)
    total = 0.0
    for k in range(grid.d):
        la, lb = _axis_slices(lr, k)
        total += float(np.sum(weights[k] * (la - lb) ** 2))
    return grid.h ** (grid.d - 2) * total


def fisher_alt(U, steady: SteadyState) -> float:
    """Same quantity with the log mean cancelled against one log difference."""
    grid = steady.grid
    U = require_positive(grid, U)
    r = as_field(grid, U / steady.values)
    lr = as_field(grid, np.log(U / steady.values))
    pi = as_field(grid, steady.values)
    total = 0.0
    for k in range(grid.d):
        ra, rb = _axis_slices(r, k)
        la, lb = _axis_slices(lr, k)
        pa, pb = _axis_slices(pi, k)
        total += float(np.sum(np.sqrt(pa * pb) * (ra - rb) * (la - lb)))
    return grid.h ** (grid.d - 2) * total


def fisher_gradient(U, steady: SteadyState, gen: Generator) -> np.ndarray:
    """Gradient representative S_i = (MU)_i/U_i + (M^T log(U/Pi))_i."""
    U = require_positive(steady.grid, U)
    M = gen.matrix
    return (M @ U) / U + M.T @ np.log(U / steady.values)


def entropy_hessian_form(U, steady: SteadyState, xi) -> float:
    """D^2 H at U applied twice to xi: h^d sum xi_j^2 / U_j."""
    grid = steady.grid
    U = require_positive(grid, U)
    xi = np.asarray(xi, dtype=float)
    if xi.shape != U.shape:
        raise ValueError(f"direction has shape {xi.shape}, expected {U.shape}")
    return grid.cell_volume * float(np.sum(xi * xi / U))


def fisher_hessian_form(U, steady: SteadyState, xi) -> float:
    """D^2 I along linear interpolation:

    h^{d-2} sum over edges of sqrt(Pi_i Pi_j) (r_i + r_j) (xi_i/U_i - xi_j/U_j)^2.
    """
    grid = steady.grid
    U = require_positive(grid, U)
    xi = np.asarray(xi, dtype=float)
    if xi.shape != U.shape:
        raise ValueError(f"direction has shape {xi.shape}, expected {U.shape}")
    r = as_field(grid, U / steady.values)
    g = as_field(grid, xi / U)
    pi = as_field(grid, steady.values)
    total = 0.0
    for k in range(grid.d):
        ra, rb = _axis_slices(r, k)
        ga, gb = _axis_slices(g, k)
        pa, pb = _axis_slices(pi, k)
        total += float(np.sum(np.sqrt(pa * pb) * (ra + rb) * (ga - gb) ** 2))
    return grid.h ** (grid.d - 2) * total


def cdi_margin(U, steady: SteadyState, gen: Generator) -> tuple[float, float]:
    """Fisher dissipation along the heat flow versus its convexity bound.

    Returns (J, bound) with J = -DI[MU] = h^d sum S_i (MU)_i and
    bound = 2 lambda_h * I(U).  For a lambda-convex potential J >= bound up to
    roundoff; the caller decides what margin to tolerate.
    """
    grid = steady.grid
    U = require_positive(grid, U)
    S = fisher_gradient(U, steady, gen)
    J = grid.cell_volume * float(np.sum(S * (gen.matrix @ U)))
    bound = 2.0 * steady.lambda_h * fisher(U, steady)
    return J, bound


@dataclass(frozen=True)
class FunctionalReport:
    """One-state snapshot of the decay diagnostics."""

    entropy: float
    fisher: float
    fisher_alt: float
    l1_to_steady: float
    ck_slack: float  # sqrt(2H) - L1; Csiszar-Kullback makes this nonnegative


def functional_report(U, steady: SteadyState) -> FunctionalReport:
    grid = steady.grid
    U = require_positive(grid, U)
    H = entropy(U, steady)
    l1 = grid.cell_volume * float(np.sum(np.abs(U - steady.values)))
    return FunctionalReport(
        entropy=H,
        fisher=fisher(U, steady),
        fisher_alt=fisher_alt(U, steady),
        l1_to_steady=l1,
        ck_slack=float(np.sqrt(2.0 * H)) - l1,
    )

"""Logarithmic mean and the discrete Onsager operator.

The edge mobility is the logarithmic mean of the neighboring density ratios
r = U / Pi, weighted by the geometric mean of the steady state:

    w_ij = sqrt(Pi_i Pi_j) * Lambda(r_i, r_j).

The operator K_U maps cotangent vectors P to tangent vectors by

    (K_U P)_i = h^-2 sum_{j ~ i} w_ij (P_i - P_j),

and the associated bilinear form is h^{d-2} sum_edges w_ij (P_i - P_j)(Q_i - Q_j).
Constants are annihilated, so everything here is invariant under adding a
constant to P; no zero-mean gauge is enforced.

Near equilibrium neighbor ratios approach each other and the defining quotient
(a - b)/(log a - log b) cancels catastrophically; below |log(a/b)| = 1e-4 the
mean switches to sqrt(a b) * sinhc(log(a/b)/2) with a three-term series, which
is where the quotient is needed most (the fourth-order flow lives there).
"""

from __future__ import annotations

import numpy as np

from .grid import as_field, require_positive
from .potential import SteadyState

__all__ = [
    "log_mean",
    "log_mean_partials",
    "edge_weights",
    "onsager_form",
    "onsager_split",
    "onsager_apply",
]

_SERIES_CUT = 1e-4


def log_mean(a, b):
    """Logarithmic mean (a - b)/(log a - log b), with Lambda(a, a) = a and
    Lambda(0, b) = 0 by continuity."""
    A = np.atleast_1d(np.asarray(a, dtype=float))
    B = np.atleast_1d(np.asarray(b, dtype=float))
    if np.any(A < 0.0) or np.any(B < 0.0):
        raise ValueError("logarithmic mean takes nonnegative arguments")
    A, B = np.broadcast_arrays(A, B)
    out = np.where(A == B, A, 0.0)  # equal pairs exact; zero edges stay zero
    work = (A > 0.0) & (B > 0.0) & (A != B)
    av = A[work]
    bv = B[work]
    x = np.log(av) - np.log(bv)
    small = np.abs(x) < _SERIES_CUT
    vals = np.empty_like(x)
    vals[~small] = (av[~small] - bv[~small]) / x[~small]
    y2 = (0.5 * x[small]) ** 2
    vals[small] = np.sqrt(av[small] * bv[small]) * (1.0 + y2 / 6.0 + y2 * y2 / 120.0)
    out[work] = vals
    if np.isscalar(a) and np.isscalar(b):
        return float(out[0])
    return out.reshape(np.broadcast_shapes(np.shape(a), np.shape(b)))


def log_mean_partials(a, b):
    """Partial derivatives of the logarithmic mean at strictly positive (a, b).

    With x = log(a/b):  dLambda/da = (x - 1 + exp(-x)) / x^2,
                        dLambda/db = (exp(x) - 1 - x) / x^2,
    both equal to 1/2 at a = b.  Uses expm1 away from the series region to
    survive the x^2/2 cancellation in the numerators.
    """
    A = np.atleast_1d(np.asarray(a, dtype=float))
    B = np.atleast_1d(np.asarray(b, dtype=float))
    if np.any(A <= 0.0) or np.any(B <= 0.0):
        raise ValueError("partials need strictly positive arguments")
    A, B = np.broadcast_arrays(A, B)
    x = np.log(A) - np.log(B)
    da = np.empty_like(x)
    db = np.empty_like(x)
    small = np.abs(x) < _SERIES_CUT
    xs = x[small]
    da[small] = 0.5 - xs / 6.0 + xs**2 / 24.0 - xs**3 / 120.0
    db[small] = 0.5 + xs / 6.0 + xs**2 / 24.0 + xs**3 / 120.0
    xl = x[~small]
    x2 = xl * xl
    da[~small] = (xl + np.expm1(-xl)) / x2
    db[~small] = (np.expm1(xl) - xl) / x2
    if np.isscalar(a) and np.isscalar(b):
        return float(da[0]), float(db[0])
    shape = np.broadcast_shapes(np.shape(a), np.shape(b))
    return da.reshape(shape), db.reshape(shape)


def _axis_slices(field: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    lo = [slice(None)] * field.ndim
    hi = [slice(None)] * field.ndim
    lo[k] = slice(0, field.shape[k] - 1)
    hi[k] = slice(1, field.shape[k])
    return field[tuple(lo)], field[tuple(hi)]


def edge_weights(U: np.ndarray, steady: SteadyState) -> list[np.ndarray]:
    """Per-axis arrays of w_ij = sqrt(Pi_i Pi_j) Lambda(r_i, r_j)."""
    grid = steady.grid
    U = require_positive(grid, U)
    r = as_field(grid, U / steady.values)
    pi = as_field(grid, steady.values)
    out = []
    for k in range(grid.d):
        ra, rb = _axis_slices(r, k)
        pa, pb = _axis_slices(pi, k)
        out.append(np.sqrt(pa * pb) * log_mean(ra, rb))
    return out


def _check_cotangent(steady: SteadyState, P: np.ndarray) -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.shape != (steady.grid.size,):
        raise ValueError(f"cotangent has shape {P.shape}, expected ({steady.grid.size},)")
    return P


def onsager_split(U, steady: SteadyState, P, Q) -> np.ndarray:
    """The d directional contributions to the Onsager form."""
    grid = steady.grid
    P = _check_cotangent(steady, P)
    Q = _check_cotangent(steady, Q)
    weights = edge_weights(U, steady)
    pf = as_field(grid, P)
    qf = as_field(grid, Q)
    scale = grid.h ** (grid.d - 2)
    parts = np.empty(grid.d)
    for k in range(grid.d):
        pa, pb = _axis_slices(pf, k)
        qa, qb = _axis_slices(qf, k)
        parts[k] = scale * float(np.sum(weights[k] * (pa - pb) * (qa - qb)))
    return parts


def onsager_form(U, steady: SteadyState, P, Q) -> float:
    """h^{d-2} sum over edges of w_ij (P_i - P_j)(Q_i - Q_j).

    Accumulated over all edges at once (a different reduction than summing the
    per-axis parts, which onsager_split does; tests compare the two).
    """
    grid = steady.grid
    P = _check_cotangent(steady, P)
    Q = _check_cotangent(steady, Q)
    weights = edge_weights(U, steady)
    pf = as_field(grid, P)
    qf = as_field(grid, Q)
    terms = []
    for k in range(grid.d):
        pa, pb = _axis_slices(pf, k)
        qa, qb = _axis_slices(qf, k)
        terms.append((weights[k] * (pa - pb) * (qa - qb)).ravel())
    scale = grid.h ** (grid.d - 2)
    return scale * float(np.sum(np.concatenate(terms)))


def onsager_apply(U, steady: SteadyState, P) -> np.ndarray:
    """(K_U P)_i, a tangent vector; sums to zero under the h^d weight."""
    grid = steady.grid
    P = _check_cotangent(steady, P)
    weights = edge_weights(U, steady)
    pf = as_field(grid, P)
    out = np.zeros(grid.shape)
    for k in range(grid.d):
        pa, pb = _axis_slices(pf, k)
        flux = weights[k] * (pa - pb)
        lo, hi = _axis_slices(out, k)
        lo += flux
        hi -= flux
    return out.ravel(order="F") / grid.h**2

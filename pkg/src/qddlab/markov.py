"""Reversible Markov generator of the discrete Fokker-Planck flow.

Per direction the generator is tridiagonal with up-rates alpha, down-rates beta
and diagonal magnitudes sigma, all scaled by h^-2:

    alpha[i] = h^-2 sqrt(f[i+1] / f[i])     (subdiagonal, rate up out of cell i)
    beta[i]  = h^-2 sqrt(f[i] / f[i+1])     (superdiagonal, rate down out of cell i+1)

where f is the 1-D steady factor and i = 0..N-2 indexes edges.  The d
dimensional generator is the Kronecker sum of these factors; its columns sum to
zero (adjoint convention, densities evolve by dU/dt = M U), the steady state is
in the kernel, and detailed balance M_ij Pi_j = M_ji Pi_i holds exactly because
both sides equal h^-2 sqrt(Pi_i Pi_j).

The two convexity-modulus estimators at the bottom certify exponential entropy
decay: the arithmetic-difference modulus (birth-death criterion) and its
geometric-mean variant.  Both take the min over interior sites 2..N-1 in
1-based display indexing, with the boundary convention alpha_N := 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.csgraph import connected_components

from .grid import Grid, as_flat
from .potential import SteadyState

__all__ = [
    "TriFactor",
    "tri_factor",
    "Generator",
    "assemble",
    "assemble_direct",
    "apply",
    "spectral_gap",
    "factor_gap",
    "ModulusReport",
    "cdpp_modulus",
    "mielke_modulus",
    "is_irreducible",
]


@dataclass(frozen=True)
class TriFactor:
    """Edge rates and diagonal of one tridiagonal 1-D generator."""

    alpha: np.ndarray
    beta: np.ndarray
    sigma: np.ndarray

    @property
    def n(self) -> int:
        return len(self.sigma)


def tri_factor(steady_factor: np.ndarray, h: float) -> TriFactor:
    f = np.asarray(steady_factor, dtype=float)
    if f.ndim != 1 or len(f) < 2:
        raise ValueError("steady factor must be a 1-D array of length >= 2")
    if not np.all(f > 0.0):
        raise ValueError("steady factor must be strictly positive")
    scale = 1.0 / h**2
    ratio = f[1:] / f[:-1]
    alpha = scale * np.sqrt(ratio)
    beta = scale * np.sqrt(f[:-1] / f[1:])
    sigma = np.empty(len(f))
    sigma[0] = alpha[0]
    sigma[-1] = beta[-1]
    # Column sums vanish bitwise: sigma stores exactly alpha[j] + beta[j-1].
    sigma[1:-1] = alpha[1:] + beta[:-1]
    for arr in (alpha, beta, sigma):
        arr.flags.writeable = False
    return TriFactor(alpha=alpha, beta=beta, sigma=sigma)


def _factor_matrix(tri: TriFactor) -> sparse.csr_matrix:
    return sparse.diags(
        [tri.alpha, -tri.sigma, tri.beta], offsets=[-1, 0, 1], format="csr"
    )


@dataclass(frozen=True)
class Generator:
    """Assembled d-dimensional generator with its 1-D factors."""

    factors: tuple[TriFactor, ...]
    matrix: sparse.csr_matrix
    steady: SteadyState

    @property
    def grid(self) -> Grid:
        return self.steady.grid


def assemble(steady: SteadyState) -> Generator:
    """Kronecker-sum assembly from the steady state's 1-D factors."""
    grid = steady.grid
    factors = tuple(tri_factor(f, grid.h) for f in steady.factors)
    n = grid.n
    matrix = None
    for k, tri in enumerate(factors):
        # Coordinate k+1 has stride n^k in flat order.
        term = sparse.kron(
            sparse.identity(n ** (grid.d - 1 - k), format="csr"),
            sparse.kron(_factor_matrix(tri), sparse.identity(n**k, format="csr")),
            format="csr",
        )
        matrix = term if matrix is None else matrix + term
    matrix = matrix.tocsr()
    matrix.sort_indices()
    return Generator(factors=factors, matrix=matrix, steady=steady)


def assemble_direct(steady: SteadyState) -> sparse.csr_matrix:
    """Entrywise assembly; matches the Kronecker sum bit for bit.

    The diagonal accumulates -(sigma_1 + sigma_2 + ...) left-associated in
    direction order, the same order in which the Kronecker terms are added.
    """
    grid = steady.grid
    factors = [tri_factor(f, grid.h) for f in steady.factors]
    n, d = grid.n, grid.d
    flat = np.arange(grid.size).reshape(grid.shape, order="F")
    rows, cols, vals = [], [], []
    diag = None
    for k, tri in enumerate(factors):
        shp = [1] * d
        shp[k] = n
        s = tri.sigma.reshape(shp)
        diag = s.astype(float) if diag is None else diag + s
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[k] = slice(0, n - 1)
        hi[k] = slice(1, n)
        sub = flat[tuple(lo)]
        low = sub.ravel()
        upp = flat[tuple(hi)].ravel()
        eshp = [1] * d
        eshp[k] = n - 1
        a = np.broadcast_to(tri.alpha.reshape(eshp), sub.shape).ravel()
        b = np.broadcast_to(tri.beta.reshape(eshp), sub.shape).ravel()
        rows += [upp, low]
        cols += [low, upp]
        vals += [a, b]
    idx = np.arange(grid.size)
    rows.append(idx)
    cols.append(idx)
    vals.append(-as_flat(grid, np.broadcast_to(diag, grid.shape)))
    matrix = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.size, grid.size),
    ).tocsr()
    matrix.sort_indices()
    return matrix


def apply(gen: Generator, U: np.ndarray) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    if U.shape != (gen.matrix.shape[0],):
        raise ValueError(f"vector has shape {U.shape}, generator is {gen.matrix.shape}")
    return gen.matrix @ U


def factor_gap(tri: TriFactor) -> float:
    """Smallest nonzero eigenvalue of the negated, symmetrized 1-D factor."""
    off = -np.sqrt(tri.alpha * tri.beta)
    evals = eigh_tridiagonal(tri.sigma, off, eigvals_only=True)
    return float(evals[1])


def spectral_gap(gen: Generator, dense_cap: int = 4096) -> float:
    """Smallest nonzero eigenvalue of -M.

    Uses a dense symmetric eigensolve of D^{-1/2}(-M)D^{1/2} (D = diag(Pi),
    symmetric by detailed balance) up to ``dense_cap`` unknowns, beyond that
    the Kronecker identity gap = min over factor gaps.
    """
    size = gen.matrix.shape[0]
    if size > dense_cap:
        return min(factor_gap(tri) for tri in gen.factors)
    s = np.sqrt(gen.steady.values)
    b = (-gen.matrix).toarray()
    b *= s[None, :]
    b /= s[:, None]
    evals = np.linalg.eigvalsh(b)
    return float(evals[1])


@dataclass(frozen=True)
class ModulusReport:
    """A convexity modulus plus the flags that qualify it."""

    value: float
    empty: bool = False  # N < 3: the interior min ranges over nothing
    nonconvex: bool = False  # some rate difference was negative


def _rate_differences(tri: TriFactor) -> tuple[np.ndarray, np.ndarray]:
    # Display sites i = 2..N-1: up-rate drop alpha_i - alpha_{i+1} with
    # alpha_N := 0, and down-rate rise beta_i - beta_{i-1}.
    ext = np.append(tri.alpha, 0.0)
    da = tri.alpha[1:] - ext[2:]
    db = tri.beta[1:] - tri.beta[:-1]
    return da, db


def cdpp_modulus(tri: TriFactor) -> ModulusReport:
    """Arithmetic-difference convex decay modulus of a 1-D factor."""
    if tri.n < 3:
        return ModulusReport(value=math.inf, empty=True)
    da, db = _rate_differences(tri)
    value = float(np.min(da + db))
    return ModulusReport(value=value, nonconvex=value < 0.0)


def mielke_modulus(tri: TriFactor) -> ModulusReport:
    """Geometric-mean variant; never exceeds the arithmetic modulus."""
    if tri.n < 3:
        return ModulusReport(value=math.inf, empty=True)
    da, db = _rate_differences(tri)
    if np.any(da < 0.0) or np.any(db < 0.0):
        return ModulusReport(value=0.0, nonconvex=True)
    return ModulusReport(value=2.0 * math.sqrt(float(np.min(da * db))))


def is_irreducible(gen: Generator) -> bool:
    ncomp, _ = connected_components(gen.matrix, directed=False)
    return ncomp == 1

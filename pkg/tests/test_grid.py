"""Lattice geometry: indexing, neighbors, edges, and the cell-average embedding."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import qddlab as q
from qddlab.grid import cell_centers_1d, require_density, require_positive

grids = st.tuples(st.integers(1, 3), st.integers(2, 6)).map(lambda t: q.Grid(*t))


def test_grid_validation():
    with pytest.raises(ValueError):
        q.Grid(0, 4)
    with pytest.raises(ValueError):
        q.Grid(2, 1)
    g = q.Grid(2, 30)
    assert abs(g.h * g.n - 1.0) <= np.finfo(float).eps
    assert g.size == 900
    assert g.shape == (30, 30)


def test_flat_index_corner_cases():
    g = q.Grid(2, 3)
    assert q.flat_index(g, (1, 1)) == 0
    assert q.flat_index(g, (2, 1)) == 1  # coordinate 1 runs fastest
    assert q.flat_index(g, (1, 2)) == 3
    assert q.flat_index(g, (3, 3)) == 8
    g1 = q.Grid(1, 5)
    assert [q.flat_index(g1, (i,)) for i in range(1, 6)] == [0, 1, 2, 3, 4]


@given(grids, st.data())
def test_index_round_trip(g, data):
    flat = data.draw(st.integers(0, g.size - 1))
    assert q.flat_index(g, q.multi_index(g, flat)) == flat


def test_index_rejects_out_of_range():
    g = q.Grid(2, 3)
    for bad in [(0, 1), (4, 1), (1,), (1, 1, 1)]:
        with pytest.raises(ValueError):
            q.flat_index(g, bad)
    with pytest.raises(ValueError):
        q.multi_index(g, 9)


def test_neighbors_examples():
    g = q.Grid(2, 3)
    assert set(q.neighbors(g, (1, 1))) == {(2, 1), (1, 2)}
    assert set(q.neighbors(g, (2, 2))) == {(1, 2), (3, 2), (2, 1), (2, 3)}
    assert q.neighbors(q.Grid(1, 2), (1,)) == [(2,)]


@given(grids, st.data())
def test_neighbor_symmetry(g, data):
    flat = data.draw(st.integers(0, g.size - 1))
    i = q.multi_index(g, flat)
    for j in q.neighbors(g, i):
        assert i in q.neighbors(g, j)
        assert sum(abs(a - b) for a, b in zip(i, j)) == 1


def test_edge_counts():
    assert q.edge_count(q.Grid(1, 3)) == 2
    assert q.edge_count(q.Grid(2, 3)) == 12
    assert q.edge_count(q.Grid(2, 30)) == 1740


@given(grids)
@settings(max_examples=30)
def test_edge_list_is_exact_cover(g):
    edges = q.edge_list(g)
    assert len(edges) == q.edge_count(g)
    seen = set()
    for a, b in edges:
        key = frozenset((a, b))
        assert key not in seen, "duplicate edge"
        seen.add(key)
        assert b in q.neighbors(g, a)


def test_field_flat_round_trip(rng):
    g = q.Grid(3, 4)
    U = rng.standard_normal(g.size)
    assert np.array_equal(q.as_flat(g, q.as_field(g, U)), U)
    # axis k of the field is coordinate k+1
    field = q.as_field(g, np.arange(g.size, dtype=float))
    assert field[1, 0, 0] == 1.0
    assert field[0, 1, 0] == 4.0
    assert field[0, 0, 1] == 16.0


def test_discretize_constant_is_uniform():
    g = q.Grid(2, 5)
    U, scale = q.discretize(g, lambda x1, x2: np.ones_like(x1))
    assert np.allclose(U, 1.0, rtol=0, atol=1e-14)
    assert scale == pytest.approx(1.0, abs=1e-14)


def test_discretize_linear_exact():
    # Gauss-Legendre integrates low-degree polynomials exactly, so cell values
    # equal the cell averages of f up to the final normalization.
    g = q.Grid(1, 4)
    U, scale = q.discretize(g, lambda x: 2.0 * x, quadrature_order=2)
    centers = cell_centers_1d(g)
    assert np.allclose(U * (1.0 / scale), 2.0 * centers, rtol=1e-15)


@given(st.integers(2, 12), st.integers(1, 7))
@settings(max_examples=40)
def test_discretize_unit_mass(n, order):
    g = q.Grid(2, n)
    U, _ = q.discretize(g, lambda x1, x2: 1.0 + x1 * x1 + np.sin(7 * x2), quadrature_order=order)
    assert abs(g.cell_volume * U.sum() - 1.0) <= 1e-12


def test_discretize_bls_normalizer():
    import math

    from qddlab.cli import _bls_datum

    g = q.Grid(2, 30)
    U, scale = q.discretize(g, _bls_datum)
    # the datum integrates to one analytically; quadrature residual only
    assert scale == pytest.approx(1.0, abs=1e-8)
    # normalizing constant of the bump part is about 0.392
    assert 2.0 * math.comb(16, 8) / 4**8 / (1.0 - 1e-4) == pytest.approx(0.3928, abs=5e-4)


def test_discretize_rejects_degenerate():
    g = q.Grid(1, 3)
    with pytest.raises(ValueError):
        q.discretize(g, lambda x: np.zeros_like(x))
    with pytest.raises(ValueError):
        q.discretize(g, lambda x: x - 0.5)  # negative part
    with pytest.raises(ValueError):
        q.discretize(g, lambda x: x, quadrature_order=0)


def test_density_guards():
    g = q.Grid(1, 4)
    ok = np.full(4, 1.0)
    assert require_density(g, ok) is not None
    with pytest.raises(ValueError):
        require_density(g, 2 * ok)
    with pytest.raises(ValueError):
        require_positive(g, np.array([1.0, 0.0, 1.0, 1.0]))
    with pytest.raises(ValueError):
        require_positive(g, np.ones(5))

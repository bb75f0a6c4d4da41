"""Steady states, entropy offset, and the discrete convexity modulus."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erf

import qddlab as q


def test_cell_averages_zero_potential():
    g = q.Grid(1, 7)
    assert np.array_equal(q.cell_averages(q.Quadratic(0.0), g), np.zeros(7))


def test_cell_averages_hand_value():
    # (1/h) * integral of 4 (x-1/2)^2 over each half of [0,1] is 1/3
    g = q.Grid(1, 2)
    avg = q.cell_averages(q.Quadratic(8.0, 0.5), g)
    assert avg == pytest.approx([1.0 / 3.0, 1.0 / 3.0], rel=1e-15)


@given(st.integers(2, 12), st.floats(0.0, 50.0))
def test_cell_averages_symmetric_for_centered_potential(n, lam):
    avg = q.cell_averages(q.Quadratic(lam, 0.5), q.Grid(1, n))
    assert np.allclose(avg, avg[::-1], rtol=0, atol=1e-13)


def test_cell_averages_matches_quadrature(rng):
    # the closed form should agree with brute-force integration
    n = 9
    g = q.Grid(1, n)
    lam, xbar = 13.0, 0.3
    avg = q.cell_averages(q.Quadratic(lam, xbar), g)
    for j in range(n):
        xs = np.linspace(j * g.h, (j + 1) * g.h, 20001)
        vals = 0.5 * lam * (xs - xbar) ** 2
        brute = np.trapezoid(vals, xs) / g.h
        assert avg[j] == pytest.approx(brute, rel=1e-8)


def test_tabulated_round_trip_and_length_check():
    g = q.Grid(1, 3)
    pot = q.Tabulated((0.1, 0.2, 0.3), lam=0.0)
    assert np.array_equal(q.cell_averages(pot, g), [0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        q.cell_averages(pot, q.Grid(1, 4))


def test_lambda_h_values():
    assert q.lambda_h(0.0, 0.1) == 0.0
    assert q.lambda_h(8.0, 0.5) == pytest.approx(8.0 * (1.0 - math.exp(-1.0)), rel=1e-15)
    # closed form at h = 1/30; the series bound pins the deviation from lambda
    val = q.lambda_h(1.0, 1.0 / 30.0)
    assert val == pytest.approx(1800.0 * -math.expm1(-1.0 / 1800.0), rel=1e-15)
    assert val == pytest.approx(0.99972226, abs=1e-7)
    assert 0.0 <= 1.0 - val <= 1.0 / 3600.0  # lambda^2 h^2 / 4


@given(st.floats(0.0, 200.0), st.floats(1e-3, 0.5))
def test_lambda_h_bounds(lam, h):
    val = q.lambda_h(lam, h)
    assert 0.0 <= val <= lam + 1e-12


def test_lambda_h_monotone_in_lambda():
    lams = np.linspace(0.0, 50.0, 200)
    vals = [q.lambda_h(l, 0.1) for l in lams]
    assert np.all(np.diff(vals) >= 0.0)


@pytest.mark.parametrize("lam", [1.0, 10.0])
def test_lambda_h_second_order_rate(lam):
    for h in (0.1, 0.05, 0.025):
        ratio = (lam - q.lambda_h(lam, h)) / h**2
        assert ratio == pytest.approx(lam**2 / 4.0, rel=0.1)


def test_steady_state_flat():
    g = q.Grid(2, 4)
    s = q.steady_state((q.Quadratic(0.0), q.Quadratic(0.0)), g)
    assert np.array_equal(s.values, np.ones(16))
    assert s.z_h == (1.0, 1.0)
    assert s.gamma_h == 0.0
    assert s.lambda_h == 0.0


def test_steady_state_equal_averages_forces_uniform():
    s = q.steady_state((q.Quadratic(8.0, 0.5),), q.Grid(1, 2))
    assert np.allclose(s.factors[0], 1.0, rtol=1e-15)


def test_gamma_hand_value():
    # d=1, N=2, lambda=8: continuous Z = (sqrt(pi)/2) erf(1), lattice Z = e^{-1/3}
    s = q.steady_state((q.Quadratic(8.0, 0.5),), q.Grid(1, 2))
    expected = 1.0 / 3.0 + math.log(math.sqrt(math.pi) / 2.0 * erf(1.0))
    assert s.gamma_h == pytest.approx(expected, rel=1e-10)
    assert s.gamma_h > 0.0


def test_gamma_decreases_with_resolution():
    gammas = [
        q.steady_state((q.Quadratic(8.0, 0.5),), q.Grid(1, n)).gamma_h
        for n in (2, 4, 8, 16, 32)
    ]
    assert all(a > b for a, b in zip(gammas, gammas[1:]))
    assert gammas[-1] < 1e-3


@given(
    st.integers(1, 3),
    st.integers(2, 5),
    st.lists(st.floats(-2.0, 2.0), min_size=2, max_size=5),
)
@settings(max_examples=60)
def test_gamma_nonnegative_and_factorization(d, n, table):
    table = (table * n)[:n]
    pots = tuple(q.Tabulated(tuple(table), lam=0.0) for _ in range(d))
    g = q.Grid(d, n)
    s = q.steady_state(pots, g)
    assert s.gamma_h >= 0.0
    # assembled value factorizes exactly over the per-direction tables
    for flat in range(0, g.size, max(1, g.size // 17)):
        idx = q.multi_index(g, flat)
        prod = 1.0
        for k in range(d):
            prod = prod * s.factors[k][idx[k] - 1]
        assert s.values[flat] == prod
    # each factor is a probability density for the weight h
    for f in s.factors:
        assert g.h * f.sum() == pytest.approx(1.0, abs=1e-13)


def test_shift_invariance():
    g = q.Grid(1, 6)
    base = tuple(np.linspace(0.0, 1.5, 6))
    s0 = q.steady_state((q.Tabulated(base, 0.0),), g)
    s1 = q.steady_state((q.Tabulated(tuple(v + 37.5 for v in base), 0.0),), g)
    assert np.allclose(s0.values, s1.values, rtol=1e-13)


def test_minimality_of_steady_state(rng):
    g, s = q.Grid(1, 8), None
    s = q.steady_state((q.Quadratic(4.0, 0.3),), g)
    assert q.entropy(s.values, s) == 0.0
    for _ in range(100):
        U = rng.uniform(0.2, 2.0, g.size)
        U /= g.cell_volume * U.sum()
        H = q.entropy(U, s)
        assert H > 0.0
        if np.max(np.abs(U - s.values)) >= 1e-3:
            assert H >= 1e-12


def test_overflow_guard_mentions_shifting():
    with pytest.raises(OverflowError, match="shift"):
        q.steady_state((q.Quadratic(2.0e4, 0.5),), q.Grid(1, 2))


def test_lambda_h_uses_smallest_factor_modulus():
    g = q.Grid(2, 5)
    s = q.steady_state((q.Quadratic(3.0), q.Quadratic(11.0)), g)
    assert s.lambda_h == q.lambda_h(3.0, g.h)


def test_w_from_v():
    w0 = q.w_from_v((q.Quadratic(0.0), q.Quadratic(0.0)))
    assert w0(0.3, 0.9) == 0.0
    w = q.w_from_v((q.Quadratic(100.0, 0.5), q.Quadratic(100.0, 0.5)))
    assert w(0.5, 0.5) == pytest.approx(-400.0)
    w1 = q.w_from_v((q.Quadratic(2.0, 0.0),))
    assert w1(1.0) == pytest.approx(0.0)
    with pytest.raises(NotImplementedError):
        q.w_from_v((q.Tabulated((0.0, 0.0), 0.0),))

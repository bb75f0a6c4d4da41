"""Implicit Euler stepping of both flows: fixed points, decay bounds, Newton."""

import math

import numpy as np
import pytest

import qddlab as q


def random_density(rng, g, lo=0.2, hi=2.5):
    U = rng.uniform(lo, hi, g.size)
    return U / (g.cell_volume * U.sum())


def bump_density(g):
    # deterministic, well inside the positive orthant, not symmetric
    x = (np.arange(g.size) + 0.5) / g.size
    U = 1.0 + 0.6 * np.sin(2.0 * math.pi * x) + 0.2 * np.cos(5.0 * x)
    return U / (g.cell_volume * U.sum())


def test_config_defaults_and_validation():
    cfg = q.StepperConfig(tau=1e-5)
    assert cfg.newton_tol == 1e-11
    assert cfg.newton_max_iter == 50
    assert cfg.damping == "halving"
    assert cfg.jacobian == "analytic"
    for bad in (
        dict(tau=0.0),
        dict(tau=-1e-3),
        dict(tau=1e-5, newton_tol=0.0),
        dict(tau=1e-5, newton_max_iter=0),
        dict(tau=1e-5, damping="cubic"),
        dict(tau=1e-5, jacobian="automatic"),
    ):
        with pytest.raises(ValueError):
            q.StepperConfig(**bad)


def test_fp_step_hand_solve(make_setup):
    g, s, gen = make_setup(1, 2)
    out = q.fp_step(gen, np.array([1.5, 0.5]), 1.0 / 16.0)
    assert out == pytest.approx([4.0 / 3.0, 2.0 / 3.0], rel=1e-13)


def test_fp_step_fixes_steady_state(make_setup):
    g, s, gen = make_setup(2, 5, lam=4.0)
    out = q.fp_step(gen, s.values, 1e-3)
    assert np.max(np.abs(out - s.values)) <= 1e-13 * s.values.max()


def test_fp_step_dissipates_entropy(make_setup, rng):
    g, s, gen = make_setup(2, 4, lam=3.0)
    for _ in range(100):
        U = random_density(rng, g)
        out = q.fp_step(gen, U, 1e-3)
        assert np.all(out > 0.0)
        assert q.entropy(out, s) <= q.entropy(U, s)
        mass_in = g.cell_volume * U.sum()
        mass_out = g.cell_volume * out.sum()
        assert abs(mass_out - mass_in) <= 1e-12


def test_fp_step_rejects_bad_tau(make_setup):
    g, s, gen = make_setup(1, 4)
    with pytest.raises(ValueError):
        q.fp_step(gen, np.ones(4), 0.0)


def test_qdd_rhs_vanishes_at_equilibrium(make_setup):
    g, s, gen = make_setup(2, 5, lam=3.0)
    rhs = q.qdd_rhs(s.values, s, gen)
    assert np.max(np.abs(rhs)) <= 1e-10 * g.h**-4


def test_qdd_rhs_dissipation_sign_and_mass(make_setup, rng):
    g, s, gen = make_setup(1, 6, lam=2.0)
    for _ in range(1000):
        U = random_density(rng, g)
        S = q.fisher_gradient(U, s, gen)
        rhs = q.qdd_rhs(U, s, gen)
        form = q.onsager_form(U, s, S, S)
        pairing = -g.cell_volume * float(S @ rhs)  # DI[F] with DI = -S
        assert pairing <= 1e-13 * max(1.0, form)
        assert abs(g.cell_volume * rhs.sum()) <= 1e-13 * g.h**-2 * np.max(np.abs(S))


def test_qdd_step_at_equilibrium(make_setup):
    g, s, gen = make_setup(2, 4, lam=5.0)
    out, diag = q.qdd_step(s.values, s, gen, q.StepperConfig(tau=1e-6))
    assert np.array_equal(out, s.values)
    assert diag.iterations <= 1
    assert diag.residual <= 1e-11
    assert diag.halvings == 0


def test_qdd_step_per_step_decay_bound(make_setup):
    # one-step contraction of both functionals at the certified rate
    g, s, gen = make_setup(1, 8, lam=2.0)
    cfg = q.StepperConfig(tau=1e-4)
    factor = 1.0 + (2.0 * s.lambda_h) ** 2 * cfg.tau
    U = bump_density(g)
    for _ in range(20):
        nxt, _ = q.qdd_step(U, s, gen, cfg)
        assert q.entropy(nxt, s) <= q.entropy(U, s) / factor * (1.0 + 1e-9)
        assert q.fisher(nxt, s) <= q.fisher(U, s) / factor * (1.0 + 1e-9)
        U = nxt


def test_jacobian_against_finite_differences(make_setup, rng):
    from qddlab.flow import _fd_jacobian

    g, s, gen = make_setup(1, 4, lam=1.0)
    for _ in range(5):
        U = random_density(rng, g)
        analytic = q.qdd_jacobian(U, s, gen).toarray()
        fd = _fd_jacobian(U, s, gen)
        assert np.max(np.abs(analytic - fd)) <= 1e-6 * np.max(np.abs(fd))


def test_finite_difference_mode_matches_analytic(make_setup):
    g, s, gen = make_setup(1, 5, lam=3.0)
    U = bump_density(g)
    a, _ = q.qdd_step(U, s, gen, q.StepperConfig(tau=1e-4))
    b, _ = q.qdd_step(
        U, s, gen, q.StepperConfig(tau=1e-4, jacobian="finite_difference")
    )
    assert np.max(np.abs(a - b)) <= 1e-10 * a.max()


def test_newton_quadratic_convergence_regression(make_setup):
    # designated instance: the residual sequence must contract quadratically
    g, s, gen = make_setup(1, 8, lam=4.0)
    U = bump_density(g)
    _, diag = q.qdd_step(U, s, gen, q.StepperConfig(tau=2e-4))
    rs = diag.residuals
    assert len(rs) >= 3
    for prev, cur in zip(rs[1:], rs[2:]):
        assert cur <= 1e6 * prev**2


def test_undamped_mode_reaches_same_root(make_setup):
    g, s, gen = make_setup(1, 8, lam=2.0)
    U = bump_density(g)
    a, da = q.qdd_step(U, s, gen, q.StepperConfig(tau=1e-4))
    b, db = q.qdd_step(U, s, gen, q.StepperConfig(tau=1e-4, damping="undamped"))
    assert np.max(np.abs(a - b)) <= 1e-12 * a.max()
    assert da.halvings == 0 and db.halvings == 0


def test_qdd_step_failure_reports_residual(make_setup):
    g, s, gen = make_setup(1, 8, lam=1.0)
    cfg = q.StepperConfig(tau=1e-2, newton_max_iter=1)
    with pytest.raises(q.StepFailure) as exc:
        q.qdd_step(bump_density(g), s, gen, cfg)
    assert math.isfinite(exc.value.residual)
    assert exc.value.record is None


def test_evolve_zero_steps(make_setup):
    g, s, gen = make_setup(1, 6, lam=1.0)
    U = bump_density(g)
    rec = q.evolve(U, s, gen, q.StepperConfig(tau=1e-5), steps=0)
    assert len(rec) == 1
    assert rec.step[0] == 0 and rec.time[0] == 0.0
    assert math.isnan(rec.entropy_rate[0]) and math.isnan(rec.fisher_rate[0])
    assert rec.entropy[0] == pytest.approx(q.entropy(U, s), rel=1e-14)
    assert rec.mass_drift[0] == 0.0


def test_evolve_qdd_record_invariants(make_setup):
    g, s, gen = make_setup(1, 8, lam=2.0)
    cfg = q.StepperConfig(tau=1e-4)
    rec = q.evolve(bump_density(g), s, gen, cfg, steps=25)
    assert len(rec) == 26
    assert np.all(np.diff(rec.entropy) <= 1e-12)
    assert np.all(np.diff(rec.fisher) <= 1e-12)
    m = np.arange(26)
    assert np.all(rec.mass_drift <= 10.0 * cfg.newton_tol * np.maximum(m, 1))
    assert np.all(rec.newton_iters[1:] >= 1)
    # recorded rates are the backward log quotients of the recorded columns
    expect = (np.log(rec.entropy[:-1]) - np.log(rec.entropy[1:])) / cfg.tau
    assert rec.entropy_rate[1:] == pytest.approx(expect, rel=1e-12)
    # geometric decay at the certified rate, both functionals
    factor = 1.0 + (2.0 * s.lambda_h) ** 2 * cfg.tau
    for col in (rec.entropy, rec.fisher):
        lifted = col * factor**m
        assert np.all(lifted[1:] <= lifted[:-1] * (1.0 + 1e-9))
        assert np.all(col <= col[0] * factor**-m * (1.0 + 1e-9))


def test_evolve_fp_mode(make_setup, rng):
    g, s, gen = make_setup(2, 6, lam=1.0)
    rec = q.evolve(
        random_density(rng, g), s, gen, q.StepperConfig(tau=1e-3), steps=10, mode="fp"
    )
    assert np.all(np.diff(rec.entropy) <= 1e-12)
    assert np.all(rec.newton_iters == 0)
    assert rec.mass_drift.max() <= 1e-12
    with pytest.raises(ValueError):
        q.evolve(random_density(rng, g), s, gen, q.StepperConfig(tau=1e-3), 1, mode="heat")


def test_evolve_observer_contract(make_setup):
    g, s, gen = make_setup(1, 6, lam=1.0)
    cfg = q.StepperConfig(tau=1e-5)
    seen = []

    def observer(m, t, view):
        seen.append((m, t))
        with pytest.raises(ValueError):
            view[0] = 99.0

    q.evolve(bump_density(g), s, gen, cfg, steps=3, observer=observer)
    assert seen == [(m, m * cfg.tau) for m in range(4)]


def test_evolve_failure_carries_prefix(make_setup):
    g, s, gen = make_setup(1, 8, lam=1.0)
    cfg = q.StepperConfig(tau=1e-2, newton_max_iter=1)
    with pytest.raises(q.StepFailure) as exc:
        q.evolve(bump_density(g), s, gen, cfg, steps=5)
    rec = exc.value.record
    assert rec is not None
    assert len(rec) >= 1
    assert rec.step[0] == 0


def test_both_flows_fix_equilibrium(make_setup):
    g, s, gen = make_setup(2, 4, lam=2.0)
    cfg = q.StepperConfig(tau=1e-5)
    for mode in ("qdd", "fp"):
        rec = q.evolve(s.values, s, gen, cfg, steps=3, mode=mode)
        assert rec.l1_to_steady.max() <= 1e-13

import math

import numpy as np
import pytest

from pumpep.core import derive_rates, default_params, residual_norm
from pumpep.errors import StepUnderflowError
from pumpep.integrator import (
    StepControl,
    default_horizon,
    default_initial_state,
    dopri5,
    dst_curve,
    integrate,
    newton_polish,
    steady_state,
)

P = default_params()


def test_exponential_decay_without_coupling():
    p = P.updated(omega_R=0.0)
    d0 = derive_rates(p).d0
    n0 = 0.2
    ts = np.linspace(0, 5e4, 21)
    tr = integrate(p, (n0, d0, 0.0, 0.0), ts[-1], t_eval=ts)
    exact = n0 * np.exp(-2 * p.gamma_a * tr.times)
    np.testing.assert_allclose(tr.states[:, 0], exact, rtol=1e-8)


def test_trajectory_invariants():
    x0 = default_initial_state(P)
    tr = integrate(P, x0, 1e4)
    assert np.all(np.diff(tr.times) > 0)
    assert tuple(tr.states[0]) == tuple(x0)
    assert np.all(np.isfinite(tr.states))
    assert len(tr.times) == len(tr.states)


def test_energy_flow_grows_at_source_rate():
    d0 = derive_rates(P).d0
    t = 1e-2
    tr = integrate(P, (0.0, d0, 0.0, 0.0), t)
    slope = tr.states[-1, 2] / t
    assert slope == pytest.approx(P.omega_R / 2 * (1 + d0), rel=1e-4)


def test_dense_output_is_accurate():
    # harmonic oscillator y'' = -y sampled between steps
    f = lambda t, y: np.array([y[1], -y[0]])
    ts = np.linspace(0, 10, 97)
    times, ys, _, _ = dopri5(f, [1.0, 0.0], 10.0, StepControl(rtol=1e-10, atol=1e-12), t_eval=ts)
    np.testing.assert_allclose(ys[:, 0], np.cos(times), atol=1e-8)


def test_step_underflow_reported():
    # finite-time blow-up y' = y^2 from y(0) = 1 at t = 1
    f = lambda t, y: y * y
    with pytest.raises((StepUnderflowError, RuntimeError, FloatingPointError)) as exc:
        dopri5(f, [1.0], 2.0, StepControl(rtol=1e-10, atol=1e-12, max_steps=100_000))
    if isinstance(exc.value, StepUnderflowError):
        assert exc.value.t == pytest.approx(1.0, abs=1e-3)


def test_rejects_bad_controls():
    with pytest.raises(ValueError):
        StepControl(rtol=0.0)
    with pytest.raises(ValueError):
        integrate(P, default_initial_state(P), 0.0)


def test_terminal_state_matches_steady_state():
    p = P.updated(gamma_P=0.5 * P.gamma_D)
    rep = steady_state(p)
    assert rep.converged
    tr = integrate(p, default_initial_state(p), 3e6)
    np.testing.assert_allclose(tr.states[-1], rep.state.as_array(), rtol=1e-8, atol=1e-16)


def test_tolerance_refinement():
    x0 = default_initial_state(P)
    tol = 1e-7
    a = integrate(P, x0, 2e4, StepControl(rtol=tol, atol=1e-16)).states[-1]
    b = integrate(P, x0, 2e4, StepControl(rtol=tol / 10, atol=1e-17)).states[-1]
    assert np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-12)) < 10 * tol


def test_fixed_point_stays_fixed():
    x, _ = newton_polish(P, steady_state(P).state)
    tr = integrate(P, x, 1e6)
    assert np.max(np.abs(tr.states[-1] - x)) < 1e-9


def test_time_translation_invariance():
    x0 = default_initial_state(P)
    ctrl = StepControl(rtol=1e-10, atol=1e-18)
    a = integrate(P, x0, 3e4, ctrl)
    b = integrate(P, a.states[-1], 2e4, ctrl)
    c = integrate(P, x0, 5e4, ctrl)
    np.testing.assert_allclose(b.states[-1], c.states[-1], rtol=1e-7, atol=1e-16)


def test_below_ep_trajectory_stays_subthreshold():
    p = P.with_d0(-0.01)
    tr = integrate(p, (0.0, -0.01, 0.0, 0.0), 2e5)
    assert np.max(tr.states[:, 0]) < 1.0


class TestSteadyState:
    def test_dark_limit(self):
        rep = steady_state(P.updated(gamma_P=0.0))
        assert rep.converged
        np.testing.assert_allclose(rep.state, (0.0, -1.0, 0.0, 0.0), atol=1e-9)

    def test_balanced_pump_no_field(self):
        rep = steady_state(P.updated(omega_R=0.0, gamma_P=P.gamma_D))
        assert rep.converged
        np.testing.assert_allclose(rep.state, (0.0, 0.0, 0.0, 0.0), atol=1e-9)

    def test_paper_point_near_field_free_inversion(self):
        rep = steady_state(P.updated(gamma_P=0.5 * P.gamma_D))
        assert rep.converged
        assert abs(rep.state.d - (-1 / 3)) <= 0.02
        assert rep.residual < rep.tolerance
        assert residual_norm(P, rep.state) < 1e-12

    def test_without_polish_still_converges(self):
        rep = steady_state(P, polish=False)
        assert rep.converged and not rep.polished

    def test_non_convergence_is_flagged(self):
        rep = steady_state(P, horizon=10.0, polish=False)
        assert not rep.converged
        assert rep.residual >= rep.tolerance
        assert rep.elapsed_time == pytest.approx(10.0)

    def test_default_horizon(self):
        assert default_horizon(P) == pytest.approx(100 / min(2 * P.gamma_a, P.gamma_P + P.gamma_D))


class TestDstCurve:
    def test_rows_and_analytic_column(self):
        rows = dst_curve(P, [1.0, 0.0, 0.5])
        assert [r.pump_ratio for r in rows] == [1.0, 0.0, 0.5]
        assert rows[0].d0 == 0.0
        assert rows[1].d0 == -1.0
        assert rows[1].d_st == pytest.approx(-1.0, abs=1e-9)
        assert rows[2].d0 == pytest.approx(-1 / 3)
        assert all(r.converged for r in rows)

    def test_negative_ratio_rejected(self):
        with pytest.raises(ValueError):
            dst_curve(P, [-0.1])

    def test_shift_grows_with_pump(self):
        rows = dst_curve(P, [0.1, 0.3, 0.5])
        shifts = [abs(r.d_st - r.d0) for r in rows]
        assert shifts == sorted(shifts)
        assert math.isclose(rows[0].d0, (0.1 - 1) / 1.1)

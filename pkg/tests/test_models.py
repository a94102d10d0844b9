import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from linflow.errors import ObservableOverflow
from linflow.models import (FlowField, Trajectory, analytic_decay_solution, constant_flow,
                            decay_flow, integrate, linear_flow, reference_trajectory,
                            vdp_flow, vdp_limit_cycle_point)


def test_decay_flow_values():
    f = decay_flow()
    assert f(np.array([1.0]))[0] == -1.0
    assert f(np.array([0.0]))[0] == 0.0
    assert f(np.array([2.0]))[0] == -4.0


@pytest.mark.parametrize("state,expected", [((0, 0), (0, 0)), ((1, 1), (1, -1)),
                                             ((0, 1), (1, 0.5))])
def test_vdp_flow_values(state, expected):
    np.testing.assert_allclose(vdp_flow(0.5)(np.array(state, dtype=float)), expected,
                               atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.0, 3.0))
def test_vdp_evaluator_agrees_with_terms(x, y, mu):
    f = vdp_flow(mu)
    s = np.array([x, y])
    np.testing.assert_allclose(f(s), f.expand(s), rtol=1e-13, atol=1e-12)


def test_flow_rejects_bad_exponents():
    with pytest.raises(ValueError):
        FlowField(1, (((1.0, (-1,)),),))
    with pytest.raises(ValueError):
        FlowField(1, (((1.0, (1.5,)),),))
    with pytest.raises(ValueError):
        FlowField(0, ())


def test_flows_evaluate_on_batches():
    pts = np.linspace(-1, 1, 7)[:, None]
    np.testing.assert_allclose(decay_flow()(pts), -pts ** 2)
    np.testing.assert_allclose(linear_flow(-2.0)(pts), -2.0 * pts)
    np.testing.assert_allclose(constant_flow([0.5, -1.0])(np.zeros((4, 2))),
                               np.tile([0.5, -1.0], (4, 1)))


@pytest.mark.parametrize("x0,t,expected", [(1, 0, 1), (1, 1, 0.5), (2, 0.5, 1.0)])
def test_analytic_decay(x0, t, expected):
    assert analytic_decay_solution(x0, t) == pytest.approx(expected, abs=1e-15)


def test_analytic_decay_domain():
    with pytest.raises(ValueError):
        analytic_decay_solution(-1.0, 1.0)
    with pytest.raises(ValueError):
        analytic_decay_solution(1.0, -0.5)


def test_trajectory_requires_increasing_times():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, 1)))


def test_reference_decay_examples():
    traj = reference_trajectory(decay_flow(), [1.0], [0.0, 3.0])
    assert traj.states[0, 0] == 1.0
    assert traj.states[-1, 0] == pytest.approx(0.25, abs=1e-8)


@pytest.mark.parametrize("tol", [1e-6, 1e-8, 1e-10])
def test_reference_within_ten_times_tolerance(tol):
    t = np.linspace(0, 10, 201)
    traj = reference_trajectory(decay_flow(), [1.0], t, tol, tol)
    err = np.abs(traj.states[:, 0] - analytic_decay_solution(1.0, t))
    assert err.max() <= 10 * tol


def test_tenfold_tolerance_cut_reduces_error():
    t = np.linspace(0, 10, 101)
    exact = analytic_decay_solution(1.0, t)
    errors = [np.abs(reference_trajectory(decay_flow(), [1.0], t, tol, tol).states[:, 0]
                     - exact).max() for tol in (1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10)]
    assert all(b < a for a, b in zip(errors, errors[1:])), errors


@pytest.mark.xfail(strict=False, reason="adaptive step control is not monotone under a 2x "
                   "tolerance cut; error can rise by a few tens of percent between neighbours")
def test_halving_tolerance_does_not_increase_error():
    t = np.linspace(0, 10, 101)
    exact = analytic_decay_solution(1.0, t)
    errors = []
    for tol in [1e-5 / 2 ** k for k in range(8)]:
        traj = reference_trajectory(decay_flow(), [1.0], t, tol, tol)
        errors.append(np.abs(traj.states[:, 0] - exact).max())
    assert all(b <= a * (1 + 1e-12) for a, b in zip(errors, errors[1:])), errors


def _lsoda_period_return(mu, x0):
    """Independent oracle: LSODA with a Poincare section through x0 (upward y-crossing of x=x0)."""
    def rhs(t, s):
        return [s[1], -s[0] + mu * (1 - s[0] ** 2) * s[1]]

    def section(t, s):
        return s[0] - x0[0]
    section.direction = np.sign(rhs(0, x0)[0])
    sol = solve_ivp(rhs, (0, 20), x0, method="LSODA", rtol=1e-12, atol=1e-12,
                    events=section)
    hits = [(t, y) for t, y in zip(sol.t_events[0], sol.y_events[0]) if t > 1.0]
    return hits[0]


def test_vdp_warmup_is_on_limit_cycle():
    x0 = vdp_limit_cycle_point(0.5)
    T, back = _lsoda_period_return(0.5, x0)
    assert np.max(np.abs(back - x0)) <= 1e-4
    assert 6.0 < T < 7.0
    # frozen value of the warm-up end point (DOP853, tol 1e-10)
    np.testing.assert_allclose(x0, [-1.21604818, 1.24499231], atol=1e-6)


def test_vdp_stays_in_domain_box():
    x0 = vdp_limit_cycle_point(0.5)
    traj = reference_trajectory(vdp_flow(0.5), x0, np.linspace(0, 12, 1201))
    assert np.abs(traj.states[:, 0]).max() <= 4.0
    assert np.abs(traj.states[:, 1]).max() <= 3.0


def test_integrate_reports_overflow_with_partial():
    # dx/dt = x^2 from 1 blows up at t = 1
    with pytest.raises(ObservableOverflow) as info:
        integrate(lambda y: y ** 2, [1.0], np.linspace(0, 2, 21), overflow_threshold=1e8)
    exc = info.value
    assert exc.time == pytest.approx(1.0, abs=1e-6)
    assert exc.partial is not None and exc.partial.times[-1] < 1.0


def test_integrate_single_sample():
    traj = integrate(lambda y: -y, [2.0], [0.0])
    assert traj.states.shape == (1, 1) and traj.states[0, 0] == 2.0

from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linflow.carleman import (carleman_error_bound, enumerate_monomials, invariant_inverse,
                              invariant_observable, lift_decay, lift_polynomial, lift_vdp,
                              propagate_linear, solve_via_invariant)
from linflow.errors import ObservableOverflow
from linflow.models import analytic_decay_solution, linear_flow


def test_enumeration_examples():
    assert enumerate_monomials(1, 3).ordering == ((0,), (1,), (2,), (3,))
    assert enumerate_monomials(2, 2).ordering == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
    assert enumerate_monomials(2, 49).size == 1275


@pytest.mark.parametrize("d", range(50))
def test_basis_size_identity(d):
    basis = enumerate_monomials(2, d)
    assert basis.size == (d + 1) * (d + 2) // 2 == comb(d + 2, 2)
    assert len(set(basis.ordering)) == basis.size
    assert all(sum(e) <= d for e in basis.ordering)


def test_basis_evaluate_and_linear_indices():
    basis = enumerate_monomials(2, 2)
    np.testing.assert_allclose(basis.evaluate(np.array([2.0, 3.0])), [1, 2, 3, 4, 6, 9])
    assert basis.linear_indices == (1, 2)
    assert basis.index((1, 1)) == 4


def test_lift_decay_order3():
    L = lift_decay(3).generator.toarray()
    expected = np.zeros((4, 4))
    expected[1, 2] = -1
    expected[2, 3] = -2
    np.testing.assert_array_equal(L, expected)


def test_lift_decay_order1_is_constant():
    system = lift_decay(1)
    assert system.generator.nnz == 0
    traj = system.state_estimate(propagate_linear(system, [0.7], np.linspace(0, 2, 5)))
    np.testing.assert_array_equal(traj.states[:, 0], 0.7)


def test_lift_decay_order100_shape():
    system = lift_decay(100)
    assert system.generator.shape == (101, 101)
    assert system.generator.nnz == 99
    assert system.generator[100].nnz == 0


def test_lift_vdp_degree49():
    system = lift_vdp(49, 0.5)
    L = system.generator.tocsr()
    basis = system.basis
    assert L.shape == (1275, 1275)
    for r, alpha in enumerate(basis.ordering):
        if sum(alpha) >= 48:
            assert L[r].nnz == 0
    row10 = L[basis.index((1, 0))].toarray().ravel()
    expected10 = np.zeros(1275)
    expected10[basis.index((0, 1))] = 1.0
    np.testing.assert_array_equal(row10, expected10)
    row01 = L[basis.index((0, 1))].toarray().ravel()
    expected01 = np.zeros(1275)
    expected01[basis.index((1, 0))] = -1.0
    expected01[basis.index((0, 1))] = 0.5
    expected01[basis.index((2, 1))] = -0.5
    np.testing.assert_array_equal(row01, expected01)


@pytest.mark.parametrize("m,n", [(2, 3), (5, 1), (0, 4), (3, 0)])
def test_lift_vdp_rows_match_hand_formula(m, n):
    mu = 0.5
    system = lift_vdp(12, mu)
    b = system.basis
    expected = np.zeros(b.size)
    if m:
        expected[b.index((m - 1, n + 1))] += m
    if n:
        expected[b.index((m + 1, n - 1))] -= n
        expected[b.index((m, n))] += mu * n
        expected[b.index((m + 2, n))] -= mu * n
    got = system.generator.tocsr()[b.index((m, n))].toarray().ravel()
    np.testing.assert_allclose(got, expected, atol=0)


def test_linear_flow_lifting_is_exact():
    # x' = -x lifts to g_k' = -k g_k, closed at any order
    system = lift_polynomial(linear_flow(-1.0), 4, 5)
    np.testing.assert_array_equal(system.generator.toarray(), np.diag([0, -1, -2, -3, -4]))


def test_decay_order100_short_time_accuracy():
    t = np.linspace(0, 0.5, 51)
    system = lift_decay(100)
    est = system.state_estimate(propagate_linear(system, [1.0], t))
    assert np.max(np.abs(est.states[:, 0] - analytic_decay_solution(1.0, t))) < 1e-3


def test_decay_order100_long_time_failure():
    t = np.linspace(0, 3, 31)
    system = lift_decay(100)
    est = system.state_estimate(propagate_linear(system, [1.0], t))
    assert abs(est.states[-1, 0] - 0.25) > 1.0


def test_fixed_point_observables_stay_put():
    system = lift_decay(7)
    obs = propagate_linear(system, [0.0], np.linspace(0, 5, 6))
    expected = np.zeros(8)
    expected[0] = 1.0
    np.testing.assert_array_equal(obs.states, np.tile(expected, (6, 1)))


def test_overflow_is_reported():
    system = lift_decay(100)
    with pytest.raises(ObservableOverflow) as info:
        propagate_linear(system, [1.0], np.linspace(0, 10, 11), overflow_threshold=1e30)
    assert 0 < info.value.time < 10


def test_error_bound_values():
    assert carleman_error_bound(100, 0.5) == pytest.approx(2 * 0.5 ** 100, rel=1e-14)
    assert carleman_error_bound(7, 0.0) == 0.0
    assert carleman_error_bound(1, 0.9) == pytest.approx(9.0, rel=1e-14)
    with pytest.raises(ValueError):
        carleman_error_bound(3, 1.0)


@pytest.mark.parametrize("x0,t,expected", [(1, 1, 0.5), (1, 0, 1.0), (2, 3, 2 / 7)])
def test_invariant_solver_examples(x0, t, expected):
    assert solve_via_invariant(x0, t) == pytest.approx(expected, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.0, 10.0))
def test_invariant_solver_is_exact(x0, t):
    assert abs(solve_via_invariant(x0, t) - analytic_decay_solution(x0, t)) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(0.02, 50.0))
def test_invariant_roundtrip(x):
    assert invariant_inverse(invariant_observable(x)) == pytest.approx(x, rel=1e-13)


def test_invariant_domain_checks():
    with pytest.raises(ValueError):
        invariant_observable(0.0)
    with pytest.raises(ValueError):
        invariant_inverse(1.0)
    with pytest.raises(ValueError):
        solve_via_invariant(-1.0, 1.0)

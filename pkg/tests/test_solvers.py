import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import solve_continuous_lyapunov
from scipy.optimize import brentq

from olsbpi import model as mc
from olsbpi.errors import MonotonicityWarning, NoConvergence, NotAdmissible
from olsbpi.model import CostWeights, SystemModel
from olsbpi.solvers import (DisturbanceSpec, policy_cost, riccati_oracle, robust_pi,
                            solve_generalized_lyapunov, standard_pi)

from conftest import random_system


def scalar_input_noise(f):
    model = SystemModel(A=[[-1.0]], B=[[1.0]], C=[[1.0]], F=([[f]],))
    return model, CostWeights([[1.0]], [[1.0]])


def test_scalar_closed_form(scalar):
    model, weights, K1 = scalar
    trace = standard_pi(K1, model, weights, tol=1e-14)
    assert trace.P_final[0, 0] == pytest.approx(math.sqrt(2) - 1, abs=1e-12)
    assert riccati_oracle(model, weights)[0, 0] == pytest.approx(math.sqrt(2) - 1, abs=1e-12)
    assert trace.final_residual < 1e-12


@pytest.mark.parametrize("f", [0.1, 0.5, 1.0])
def test_scalar_input_noise_against_root_finder(f):
    model, weights = scalar_input_noise(f)
    # R(P) = 1 - 2P - P^2 / (1 + f^2 P)
    root = brentq(lambda p: 1 - 2 * p - p * p / (1 + f * f * p), 0.0, 1.0, xtol=1e-15)
    trace = standard_pi(np.zeros((1, 1)), model, weights, tol=1e-14)
    assert trace.P_final[0, 0] == pytest.approx(root, abs=1e-12)


def test_lyapunov_matches_scipy_without_noise(rng):
    model = SystemModel(A=rng.normal(size=(3, 3)) - 3 * np.eye(3), B=np.ones((3, 1)),
                        C=np.eye(3))
    K = np.zeros((1, 3))
    S = np.diag([1.0, 2.0, 3.0])
    P = solve_generalized_lyapunov(K, S, model)
    np.testing.assert_allclose(P, solve_continuous_lyapunov(model.A.T, -S), atol=1e-12)


def test_policy_cost_rejects_unstable_gain(scalar):
    model, weights, _ = scalar
    with pytest.raises(NotAdmissible):
        policy_cost(np.array([[-2.0]]), model, weights)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.integers(1, 2), st.integers(0, 2**31))
def test_policy_iteration_properties(n, m, seed):
    model, weights, K1 = random_system(np.random.default_rng(seed), n, m, min_margin=0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("error", MonotonicityWarning)
        trace = standard_pi(K1, model, weights, max_iter=30, tol=1e-12)
    assert all(s.admissible for s in trace.steps)
    for prev, cur in zip(trace.steps, trace.steps[1:]):
        scale = max(1.0, np.linalg.norm(prev.P))
        assert np.linalg.eigvalsh(prev.P - cur.P)[0] >= -1e-8 * scale
    assert trace.final_residual < 1e-8 * max(1.0, np.linalg.norm(trace.P_final))


def test_oracle_agrees_with_policy_iteration(rng):
    for _ in range(5):
        model, weights, K1 = random_system(rng, 3, 2, 1, 1)
        P_pi = standard_pi(K1, model, weights, tol=1e-13).P_final
        P_or = riccati_oracle(model, weights)
        np.testing.assert_allclose(P_or, P_pi, atol=1e-8 * np.linalg.norm(P_pi))


def test_no_convergence_raised(two_state):
    model, weights, K1 = two_state
    with pytest.raises(NoConvergence) as info:
        standard_pi(K1, model, weights, max_iter=2, tol=1e-14)
    assert info.value.context["iteration"] == 2


def test_fixed_iteration_count(two_state):
    model, weights, K1 = two_state
    trace = standard_pi(K1, model, weights, max_iter=7, tol=None)
    assert len(trace.steps) == 7
    assert not trace.converged


def test_initial_gain_must_be_admissible(scalar):
    model, weights, _ = scalar
    with pytest.raises(NotAdmissible) as info:
        standard_pi(np.array([[-5.0]]), model, weights)
    assert info.value.context["iteration"] == 1


def test_robust_pi_without_disturbance_is_standard_pi(two_state):
    model, weights, K1 = two_state
    exact = standard_pi(K1, model, weights, max_iter=8, tol=None)
    robust = robust_pi(K1, model, weights, DisturbanceSpec("none"), max_iter=8)
    for a, b in zip(exact.steps, robust.steps):
        np.testing.assert_array_equal(a.P, b.P)


@pytest.mark.parametrize("mode", ["constant", "decaying", "random-bounded"])
def test_disturbance_magnitudes(mode):
    draw = DisturbanceSpec(mode, 0.3, seed=5).sampler(4)
    for i in (1, 2, 3):
        dG = draw(i)
        np.testing.assert_array_equal(dG, dG.T)
        expect = 0.3 / i**2 if mode == "decaying" else 0.3
        assert np.linalg.norm(dG) == pytest.approx(expect)
    if mode == "constant":
        np.testing.assert_array_equal(draw(1), draw(5))


def test_disturbance_is_seeded():
    a = DisturbanceSpec("random-bounded", 1.0, seed=3).sampler(3)
    b = DisturbanceSpec("random-bounded", 1.0, seed=3).sampler(3)
    for i in range(1, 4):
        np.testing.assert_array_equal(a(i), b(i))
    with pytest.raises(ValueError):
        DisturbanceSpec("sometimes", 1.0)


def test_robust_pi_records_failure_instead_of_raising():
    # open-loop unstable, so a badly perturbed gain loses admissibility
    model = SystemModel(A=[[1.0]], B=[[1.0]], C=[[1.0]])
    weights = CostWeights([[1.0]], [[1.0]])
    failed = 0
    for seed in range(20):
        trace = robust_pi(np.array([[3.0]]), model, weights,
                          DisturbanceSpec("constant", 20.0, seed=seed), max_iter=10)
        if trace.failure is not None:
            failed += 1
            assert trace.failure_iteration == trace.steps[-1].index > 1
            assert not trace.steps[-1].admissible
    assert failed > 0


def test_robust_pi_small_constant_disturbance_stays_close(two_state):
    model, weights, K1 = two_state
    P_star = standard_pi(K1, model, weights, tol=1e-13).P_final
    trace = robust_pi(K1, model, weights, DisturbanceSpec("constant", 1e-4, seed=1),
                      max_iter=30)
    assert trace.failure is None
    assert np.linalg.norm(trace.P_final - P_star) < 1e-2

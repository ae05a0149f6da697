import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import enumerate_cost
from tilq.errors import InvalidInputError, ResourceLimitError, UnsupportedNoiseError
from tilq.feedback import solve_feedback
from tilq.generate import random_problem
from tilq.open_loop import solve_open_loop
from tilq.problem import InitialPair
from tilq.simulation import (NoiseModel, NoisePath, PolicySpec, build_tree, enumerate_paths, evaluate_cost,
                             exact_expected_cost, monte_carlo_cost, simulate, solve_adjoint,
                             trajectories_to_csv, tree_costs)


def test_noise_models():
    assert NoiseModel().support()[0].tolist() == [1.0, -1.0]
    tp = NoiseModel.two_point(0.2)
    vals, probs = tp.support()
    assert probs @ vals == pytest.approx(0.0, abs=1e-15)
    assert probs @ vals ** 2 == pytest.approx(1.0)
    with pytest.raises(InvalidInputError):
        NoiseModel("two_point", p=0.5, a=2.0, b=-1.0)
    with pytest.raises(InvalidInputError):
        NoiseModel("cauchy")
    assert not NoiseModel("gaussian").finite


def test_enumerate_paths_probabilities():
    paths = enumerate_paths(NoiseModel.two_point(0.3), 4)
    assert len(paths) == 16
    assert sum(pt.probability for pt in paths) == pytest.approx(1.0)
    with pytest.raises(ResourceLimitError):
        enumerate_paths(NoiseModel(), 21)
    with pytest.raises(UnsupportedNoiseError):
        enumerate_paths(NoiseModel("gaussian"), 2)


def test_simulate_single_path_by_hand():
    one = np.eye(1)
    from tilq.problem import make_problem
    p = make_problem(2, 2 * one, one, 0.5 * one, 0 * one, one, one, one)
    traj = simulate(p, InitialPair(0, [1.0]), PolicySpec.gain_sequence([-one, -one]), NoisePath((1.0, -1.0), 0.25))
    # x1 = 2 - 1 + 0.5 = 1.5 ; x2 = 3 - 1.5 - 0.75 = 0.75
    np.testing.assert_allclose(traj.states[:, 0], [1.0, 1.5, 0.75])
    np.testing.assert_allclose(traj.controls[:, 0], [-1.0, -1.5])
    assert evaluate_cost(p, 0, traj) == pytest.approx(1 + 1 + 1.5 ** 2 + 1.5 ** 2 + 0.75 ** 2)


def test_evaluate_cost_requires_trajectory_from_anchor(ex52):
    sol = solve_feedback(ex52)
    traj = simulate(ex52, InitialPair(1, [1.0, 0.0]), PolicySpec.strategy(sol.Phi), NoisePath((1.0, 1.0), 0.25))
    with pytest.raises(InvalidInputError):
        evaluate_cost(ex52, 0, traj)
    assert math.isfinite(evaluate_cost(ex52, 1, traj))


def test_simulate_input_checks(ex52):
    pol = PolicySpec.strategy(solve_feedback(ex52).Phi)
    with pytest.raises(InvalidInputError):
        simulate(ex52, InitialPair(0, [1.0, 0.0]), pol, NoisePath((1.0,), 0.5))
    with pytest.raises(InvalidInputError):
        simulate(ex52, InitialPair(0, [1.0]), pol, NoisePath((1.0, 1.0, 1.0), 0.125))
    with pytest.raises(InvalidInputError):
        simulate(ex52, InitialPair(0, [1.0, 0.0]), PolicySpec.strategy([np.eye(2)]), NoisePath((1.0,) * 3, 0.125))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["general", "t_independent"]), st.floats(0.1, 0.9))
def test_tree_cost_matches_path_loop(seed, structure, prob):
    rng = np.random.default_rng(seed)
    p = random_problem(rng, N=int(rng.integers(1, 5)), structure=structure, definite=False)
    K = [rng.standard_normal((p.m, p.n)) for _ in range(p.N)]
    x0 = rng.standard_normal(p.n)
    noise = NoiseModel.two_point(prob)
    vals, probs = noise.support()
    anchor = int(rng.integers(0, p.N))
    got = exact_expected_cost(p, anchor, InitialPair(anchor, x0), PolicySpec.gain_sequence(K), noise)
    want = enumerate_cost(p, anchor, x0, lambda k, x, pre: K[k] @ x, tuple(vals), tuple(probs))
    assert got == pytest.approx(want, rel=1e-10, abs=1e-10)


def test_path_dependent_controls_match_loop():
    rng = np.random.default_rng(31)
    p = random_problem(rng, N=3, structure="general")

    def fn(k, prefix):
        return np.array([sum(prefix) + k, 0.5 * len(prefix)])

    x0 = np.array([1.0, -2.0])
    got = exact_expected_cost(p, 0, InitialPair(0, x0), PolicySpec.fixed(fn))
    want = enumerate_cost(p, 0, x0, lambda k, x, pre: fn(k, pre))
    assert got == pytest.approx(want, rel=1e-12)


def test_feedback_value_equals_quadratic_form(ex52):
    sol = solve_feedback(ex52)
    for t in range(3):
        x = np.array([0.3, -1.1])
        cost = exact_expected_cost(ex52, t, InitialPair(t, x), PolicySpec.strategy(sol.Phi))
        assert cost == pytest.approx(x @ sol.P_tilde[t, t] @ x, rel=1e-10)


def test_open_loop_value_without_inconsistency():
    # P[t, k] is the adjoint coefficient, not a value function; the two coincide
    # only when later players share the anchor's weights, or at the last step
    p = random_problem(np.random.default_rng(34), N=4, structure="invariant")
    sol = solve_open_loop(p)
    x = np.array([1.0, -0.5])
    for t in range(p.N):
        cost = exact_expected_cost(p, t, InitialPair(t, x), PolicySpec.gain_sequence(sol.gains))
        assert cost == pytest.approx(x @ sol.P[t, t] @ x, rel=1e-10)


def test_open_loop_value_at_last_anchor(ex51):
    sol = solve_open_loop(ex51)
    x = np.array([1.0, 1.0])
    cost = exact_expected_cost(ex51, 2, InitialPair(2, x), PolicySpec.gain_sequence(sol.gains))
    assert cost == pytest.approx(x @ sol.P[2, 2] @ x, rel=1e-10)


def test_monte_carlo_converges_and_is_seeded(ex52):
    pol = PolicySpec.strategy(solve_feedback(ex52).Phi)
    start = InitialPair(0, [1.0, 0.0])
    exact = exact_expected_cost(ex52, 0, start, pol)
    m1, se = monte_carlo_cost(ex52, 0, start, pol, NoiseModel(), 4000, np.random.default_rng(1))
    m2, _ = monte_carlo_cost(ex52, 0, start, pol, NoiseModel(), 4000, np.random.default_rng(1))
    assert m1 == m2
    assert abs(m1 - exact) < 5 * se + 1e-9


def test_monte_carlo_gaussian_noise():
    rng = np.random.default_rng(32)
    p = random_problem(rng, N=3, structure="invariant")
    pol = PolicySpec.strategy(solve_feedback(p).Phi)
    start = InitialPair(0, [1.0, 1.0])
    exact = exact_expected_cost(p, 0, start, pol)
    # the cost is quadratic in the noise, so only the first two moments matter
    m, se = monte_carlo_cost(p, 0, start, pol, NoiseModel("gaussian"), 20000, np.random.default_rng(2))
    assert abs(m - exact) < 5 * se
    with pytest.raises(UnsupportedNoiseError):
        exact_expected_cost(p, 0, start, pol, NoiseModel("gaussian"))


def test_tree_layout_and_multiple_roots():
    rng = np.random.default_rng(33)
    p = random_problem(rng, N=3, structure="general")
    K = [rng.standard_normal((2, 2)) for _ in range(3)]
    X0 = rng.standard_normal((3, 2))
    tree = build_tree(p, 0, X0, PolicySpec.gain_sequence(K), NoiseModel())
    assert [x.shape[0] for x in tree.X] == [3, 6, 12, 24]
    per_root = tree_costs(p, 0, tree)
    for i in range(3):
        single = build_tree(p, 0, X0[i], PolicySpec.gain_sequence(K), NoiseModel())
        assert per_root[i] == pytest.approx(tree_costs(p, 0, single)[0], rel=1e-12)
    # children of node i are i*q + r
    i, r = 4, 1
    A, B, C, D = p.A[1, 1], p.B[1, 1], p.C[1, 1], p.D[1, 1]
    x, u, w = tree.X[1][i], tree.U[1][i], tree.values[r]
    np.testing.assert_allclose(tree.X[2][i * 2 + r], A @ x + B @ u + w * (C @ x + D @ u))


@pytest.mark.parametrize("seed", range(5))
def test_adjoint_decouples_for_feedback(seed):
    p = random_problem(np.random.default_rng(seed), N=4, structure="general")
    sol = solve_feedback(p)
    x = np.ones(p.n)
    for k in range(p.N):
        tree = build_tree(p, k, x, PolicySpec.strategy(sol.Phi), NoiseModel(), rows=k)
        Z = solve_adjoint(p, k, tree, kind="feedback", Phi=sol.Phi)
        for ell, z in Z.items():
            np.testing.assert_allclose(z, tree.X[tree.level(ell)] @ sol.P_tilde[k, ell].T, rtol=1e-9, atol=1e-9)


def test_adjoint_input_checks(ex52):
    tree = build_tree(ex52, 1, [1.0, 0.0], PolicySpec.strategy(solve_feedback(ex52).Phi), NoiseModel())
    with pytest.raises(InvalidInputError):
        solve_adjoint(ex52, 0, tree)
    with pytest.raises(InvalidInputError):
        solve_adjoint(ex52, 1, tree, kind="feedback")


def test_csv_dump(ex52):
    pol = PolicySpec.strategy(solve_feedback(ex52).Phi)
    trajs = [simulate(ex52, InitialPair(1, [1.0, 0.0]), pol, pt) for pt in enumerate_paths(NoiseModel(), 2)]
    lines = trajectories_to_csv(trajs).splitlines()
    assert lines[0] == "path,step,x0,x1,u0,u1,w,probability"
    assert len(lines) == 1 + 4 * 3

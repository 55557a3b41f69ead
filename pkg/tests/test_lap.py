import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import linear_sum_assignment

from plantedmatch import PermutationMap, brute_force_mle, generate_instance, mle, solve_assignment
from plantedmatch.model import cost_matrices, error_report


def test_small_examples():
    sol = solve_assignment([[0, 1], [1, 0]])
    assert sol.permutation == PermutationMap([0, 1]) and sol.objective == 0
    sol = solve_assignment([[4, 1, 3], [2, 0, 5], [3, 2, 2]])
    assert sol.objective == 5
    assert brute_force_mle([[4, 1, 3], [2, 0, 5], [3, 2, 2]]).objective == 5
    sol = solve_assignment([[9, 1], [1, 9]], "maximize")
    assert sol.permutation == PermutationMap([0, 1]) and sol.objective == 18


def test_brute_force_trivial_and_guard():
    assert brute_force_mle([[3.0]]).permutation == PermutationMap([0])
    with pytest.raises(ValueError):
        brute_force_mle(np.zeros((11, 11)))


@pytest.mark.parametrize("bad", [np.zeros((2, 3)), np.array([[0.0, np.inf], [1, 2]]), np.array([[np.nan]])])
def test_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        solve_assignment(bad)


def test_rejects_bad_direction():
    with pytest.raises(ValueError):
        solve_assignment(np.eye(2), "sideways")


def test_brute_force_dominates_random_permutations():
    rng = np.random.default_rng(0)
    c = rng.normal(size=(7, 7))
    best = brute_force_mle(c).objective
    for _ in range(50):
        p = rng.permutation(7)
        assert best <= c[np.arange(7), p].sum() + 1e-12


def test_ties_resolve_lexicographically():
    sol = solve_assignment(np.zeros((4, 4)))
    assert sol.permutation == PermutationMap.identity(4) and sol.unique is False
    c = np.array([[1, 1, 5], [1, 1, 5], [5, 5, 0]])
    sol = solve_assignment(c)
    assert sol.permutation.to_list() == [0, 1, 2] and sol.unique is False
    assert brute_force_mle(c).permutation == sol.permutation


def test_integer_ties_match_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = int(rng.integers(2, 7))
        c = rng.integers(0, 3, size=(n, n)).astype(float)
        sol = solve_assignment(c)
        brute = brute_force_mle(c)
        assert sol.objective == brute.objective
        assert sol.permutation == brute.permutation
        assert sol.unique == brute.unique


square = st.integers(1, 9).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(-100, 100, allow_nan=False, width=32))
)


@settings(max_examples=60, deadline=None)
@given(square)
def test_optimal_against_scipy(c):
    sol = solve_assignment(c, check_unique=False)
    r, k = linear_sum_assignment(c)
    assert sol.objective == pytest.approx(c[r, k].sum(), abs=1e-9 * max(1, np.abs(c).max()) * len(c))
    assert sol.objective == pytest.approx(c[np.arange(len(c)), sol.permutation.image].sum(), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(square, st.data())
def test_row_column_shift_invariance(c, data):
    n = len(c)
    rows = np.array(data.draw(st.lists(st.integers(-50, 50), min_size=n, max_size=n)), dtype=float)
    cols = np.array(data.draw(st.lists(st.integers(-50, 50), min_size=n, max_size=n)), dtype=float)
    a = solve_assignment(c)
    b = solve_assignment(c + rows[:, None] + cols[None, :])
    if a.unique:
        assert a.permutation == b.permutation
    assert b.objective - rows.sum() - cols.sum() == pytest.approx(a.objective, abs=1e-6)


def test_mle_zero_noise_and_w_equivalence():
    inst = generate_instance(30, 2, 0.0, 4)
    assert error_report(mle(inst).permutation, inst.planted).error_count == 0
    for seed in range(20):
        inst = generate_instance(40, 2, 0.05, seed)
        cm = cost_matrices(inst)
        assert solve_assignment(cm.w, "maximize").permutation == mle(inst).permutation


def test_random_instances_unique():
    for seed in range(20):
        assert mle(generate_instance(25, 3, 0.2, seed), check_unique=True).unique


def test_matches_scipy_at_scale():
    rng = np.random.default_rng(2)
    for n in (50, 300):
        c = rng.random((n, n))
        r, k = linear_sum_assignment(c)
        sol = solve_assignment(c, check_unique=False)
        assert np.array_equal(sol.permutation.image, k[np.argsort(r)])


def test_brute_force_enumerates_all():
    c = np.arange(16, dtype=float).reshape(4, 4) ** 1.5
    vals = [c[np.arange(4), p].sum() for p in itertools.permutations(range(4))]
    assert brute_force_mle(c).objective == pytest.approx(min(vals))
    assert brute_force_mle(c, "maximize").objective == pytest.approx(max(vals))

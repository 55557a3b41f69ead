import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from plantedmatch import theory as th
from plantedmatch.augmenting import (
    AugGraph,
    build_aug_graph,
    edge_correlation,
    enumerate_augmenting_cycles,
    error_cycles,
    estimate_edge_probability,
    is_augmenting,
    lower_bound_errors,
    max_matching,
    path_cycle_frequency,
    subgraph_bound,
)
from plantedmatch.lap import mle
from plantedmatch.model import aligned_inner_products, derive_seed, error_report, generate_instance


def test_is_augmenting_examples():
    w = np.array([[0.0, 1.0], [1.0, 0.0]])
    wit = is_augmenting(w, (0, 1))
    assert wit.margin == 2 and wit.augmenting
    inst = generate_instance(6, 2, 0.0, 1, random_planted=False)
    w = aligned_inner_products(inst)
    for i, j in itertools.combinations(range(6), 2):
        wit = is_augmenting(w, (i, j))
        dist2 = float(((inst.points_x[i] - inst.points_x[j]) ** 2).sum())
        assert wit.margin == pytest.approx(-dist2) and not wit.augmenting
    with pytest.raises(ValueError):
        is_augmenting(w, (1, 2, 1))
    with pytest.raises(ValueError):
        is_augmenting(w, (1,))


def test_mle_cycles_are_augmenting():
    rng = np.random.default_rng(0)
    for k in range(200):
        n = int(rng.integers(2, 31))
        inst = generate_instance(n, int(rng.integers(1, 4)), float(rng.uniform(0.01, 1.0)), derive_seed(40, k),
                                 random_planted=False)
        w = aligned_inner_products(inst)
        est = mle(inst).permutation
        cycles = error_cycles(est, inst.planted)
        assert sorted(v for c in cycles for v in c) == sorted(error_report(est, inst.planted).error_indices)
        for c in cycles:
            assert is_augmenting(w, c).margin >= -1e-9


def test_error_cycles_with_random_planted():
    inst = generate_instance(40, 2, 0.3, 3, random_planted=True)
    est = mle(inst).permutation
    cycles = error_cycles(est, inst.planted)
    assert sum(len(c) for c in cycles) == error_report(est, inst.planted).error_count


def test_enumerate_examples():
    w = np.array([[0.0, 1.0], [1.0, 0.0]])
    (only,) = enumerate_augmenting_cycles(w)
    assert only.vertices == (0, 1)
    with pytest.raises(ValueError):
        enumerate_augmenting_cycles(np.zeros((13, 13)), t_max=4)
    assert len(enumerate_augmenting_cycles(np.zeros((20, 20)), t_max=2, limit=5)) == 5


def test_enumerate_is_exhaustive():
    rng = np.random.default_rng(1)
    w = rng.normal(size=(6, 6))
    got = {c.vertices for c in enumerate_augmenting_cycles(w, t_max=6)}
    want = set()
    for t in range(2, 7):
        for combo in itertools.permutations(range(6), t):
            if combo[0] == min(combo) and is_augmenting(w, combo).augmenting:
                want.add(combo)
    assert got == want


def test_error_mass_below_enumerated_mass():
    rng = np.random.default_rng(2)
    for k in range(100):
        n = int(rng.integers(2, 9))
        inst = generate_instance(n, 2, float(rng.uniform(0.05, 2.0)), derive_seed(41, k), random_planted=False)
        w = aligned_inner_products(inst)
        errors = error_report(mle(inst).permutation, inst.planted).error_count
        mass = sum(len(c.vertices) for c in enumerate_augmenting_cycles(w, t_max=n))
        assert errors <= mass


def test_two_cycle_count_below_first_moment():
    n, d, s2, trials = 20, 2, 0.1, 300
    counts = []
    for k in range(trials):
        w = aligned_inner_products(generate_instance(n, d, s2, derive_seed(42, k), random_planted=False))
        counts.append(len(build_aug_graph(w).edges))
    bound = n * (n - 1) / 2 * math.exp(-d / 2 * th.S(s2, 2))
    assert np.mean(counts) <= bound * (1 + 3 / math.sqrt(trials))


def test_aug_graph_rule():
    assert not build_aug_graph(aligned_inner_products(generate_instance(30, 2, 0.0, 0, False))).edges
    w = np.array([[0.0, 2.0, -5.0], [1.0, 0.0, -5.0], [-5.0, -5.0, 0.0]])
    assert build_aug_graph(w).edges == frozenset({(0, 1)})
    with pytest.raises(ValueError):
        build_aug_graph(np.zeros((2, 3)))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12).flatmap(lambda n: st.lists(st.floats(-5, 5), min_size=n * n, max_size=n * n)))
def test_aug_graph_matches_definition(vals):
    n = int(round(math.sqrt(len(vals))))
    w = np.array(vals).reshape(n, n)
    g = build_aug_graph(w)
    for i, j in itertools.combinations(range(n), 2):
        assert ((i, j) in g.edges) == (w[i, j] + w[j, i] >= w[i, i] + w[j, j])


def test_edge_density_vs_edge_probability():
    n, d, s2 = 200, 2, 0.05
    dens = [build_aug_graph(aligned_inner_products(generate_instance(n, d, s2, derive_seed(43, k), False))).density
            for k in range(200)]
    est = estimate_edge_probability(d, s2, 10**6, 5)
    se = np.std(dens, ddof=1) / math.sqrt(len(dens))
    assert abs(np.mean(dens) - est.p) <= 3 * math.hypot(se, est.stderr)


def test_max_matching_examples():
    tri = AugGraph(3, frozenset({(0, 1), (1, 2), (0, 2)}))
    assert max_matching(tri).size == 1
    k = 5
    pm = AugGraph(2 * k, frozenset((2 * i, 2 * i + 1) for i in range(k)))
    assert max_matching(pm, "exact").size == k == max_matching(pm, "greedy").size
    with pytest.raises(ValueError):
        max_matching(AugGraph(201, frozenset()), "exact")
    with pytest.raises(ValueError):
        max_matching(tri, "optimal")


def test_greedy_vs_exact_matching():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(1, 61))
        p = rng.uniform(0.01, 0.3)
        g = AugGraph(n, frozenset((i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < p))
        ex, gr = max_matching(g, "exact").size, max_matching(g, "greedy").size
        assert gr <= ex <= 2 * gr


def test_lower_bound_errors():
    rep = lower_bound_errors(generate_instance(20, 2, 0.0, 0))
    assert rep.M == 0 and rep.error_count == 0 and rep.holds
    rng = np.random.default_rng(4)
    for k in range(200):
        n = int(rng.integers(2, 101))
        rep = lower_bound_errors(generate_instance(n, 2, float(10 ** rng.uniform(-5, -1)), derive_seed(44, k)))
        assert rep.holds and rep.M <= rep.error_count and 2 * rep.M <= n


def test_edge_probability_limits_and_samplers():
    assert estimate_edge_probability(2, 1e-4, 10**5, 1, method="plain").p < 1e-3
    plain = estimate_edge_probability(2, 0.1, 10**6, 2, method="plain")
    scalar = estimate_edge_probability(2, 0.1, 10**5, 3, method="scalar")
    two = estimate_edge_probability(2, 0.1, 10**5, 4, method="two_point")
    for a, b in ((plain, scalar), (plain, two), (scalar, two)):
        assert abs(a.p - b.p) <= 3 * math.hypot(a.stderr, b.stderr)
    with pytest.raises(ValueError):
        estimate_edge_probability(2, 0.1, 10, 1, method="magic")
    with pytest.raises(ValueError):
        estimate_edge_probability(2, 0.0, 10, 1)


def test_subgraph_bound_reproduces_S():
    for t in (2, 3, 5):
        path = [(i, i + 1) for i in range(t - 1)]
        assert subgraph_bound(path, t, 3, 0.2) == pytest.approx(math.exp(-1.5 * th.S(0.2, t)), rel=1e-10)
    assert subgraph_bound([(0, 1)], 2, 2, 0.1, D=[0.0]) == 1.0
    with pytest.raises(ValueError):
        subgraph_bound([(0, 1)], 2, 2, 0.1, D=[-1.0])


@pytest.mark.parametrize("t,graph", [(2, "path"), (3, "path"), (4, "path"), (3, "cycle"), (4, "cycle")])
def test_path_cycle_frequency_below_bound(t, graph):
    freq, se, bound = path_cycle_frequency(t, 2, 0.1, 10**5, derive_seed(45, t), graph=graph)
    assert freq <= bound + 3 * se


def test_edge_correlation_reported():
    res = edge_correlation(2, 0.1, 10**5, 6)
    assert res["p_joint"] <= min(res["p_edge"] * 1.2, 1.0)
    assert res["ratio"] > 0


@pytest.mark.slow
def test_more_noise_more_errors():
    means = []
    for s2 in (0.002, 0.01, 0.05):
        errs = [error_report(mle(i := generate_instance(60, 2, s2, derive_seed(46, k), False)).permutation,
                             i.planted).error_count for k in range(100)]
        means.append(np.mean(errs))
    assert means[0] <= 1.05 * means[1] and means[1] <= 1.05 * means[2]

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiidlab.factors import BernoulliFactor, LocalMinFactor
from fiidlab.graphs import RegularMultigraph, sample_configuration_model
from fiidlab.labels import sample_labels
from fiidlab.rng import derive_rng
from fiidlab.stats import (EdgeProfile, component_degree_check, edge_profile,
                           entropy, entropy_check, entropy_functional, h,
                           percolation_stats)

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


# ------------------------------------------------------------------- h

def test_h_point_values():
    assert h(0.0) == 0.0
    assert h(1.0) == 0.0
    assert math.isclose(h(1 / math.e), 1 / math.e, rel_tol=1e-15)


def test_h_rejects_outside_unit_interval():
    with pytest.raises(ValueError):
        h(-0.1)
    with pytest.raises(ValueError):
        h(1.1)


@given(unit, unit)
@settings(max_examples=300, deadline=None)
def test_h_product_identity(x, y):
    assert abs(h(x * y) - (x * h(y) + y * h(x))) <= 1e-12


def test_h_product_identity_on_grid():
    xs = np.linspace(0, 1, 101)
    for x in xs:
        for y in xs:
            assert abs(h(x * y) - (x * h(y) + y * h(x))) <= 1e-12


@given(unit)
@settings(max_examples=300, deadline=None)
def test_h_sandwich(x):
    val = h(1 - x)
    assert x - (x**2 + x**3) / 2 <= val + 1e-15
    assert val <= x - x**2 / 2 + 1e-15


def test_h_sandwich_exact_at_endpoints():
    assert h(1.0) == 0.0  # x = 0: both bounds are 0
    assert h(0.0) == 0.0  # x = 1: lower bound is exactly 0
    assert 1 - (1 + 1) / 2 == 0.0


def test_h_vectorized():
    xs = np.array([0.0, 0.5, 1.0])
    out = h(xs)
    assert out[0] == 0.0 and out[2] == 0.0
    assert math.isclose(out[1], 0.5 * math.log(2))


# ------------------------------------------------------------- entropy

def test_entropy_values():
    assert math.isclose(entropy([0.5, 0.5]), math.log(2), rel_tol=1e-15)
    assert entropy([1.0, 0.0]) == 0.0
    assert math.isclose(entropy(np.full((2, 2), 0.25)), math.log(4))


def test_entropy_rejects_bad_distributions():
    with pytest.raises(ValueError):
        entropy([0.5, -0.5, 1.0])
    with pytest.raises(ValueError):
        entropy([0.3, 0.3])


# --------------------------------------------------------- edge profile

def triple_edge_graph():
    # two vertices joined by three parallel edges
    return RegularMultigraph(2, 3, np.array([3, 4, 5, 0, 1, 2],
                                            dtype=np.int32))


def loopy_graph():
    # loop at 0, one cross edge, loop at 1
    return RegularMultigraph(2, 3, np.array([1, 0, 3, 2, 5, 4],
                                            dtype=np.int32))


def test_edge_profile_counts_cross_edges():
    prof = edge_profile(np.array([0, 1]), triple_edge_graph(), 2)
    assert prof.counts.tolist() == [[0, 3], [3, 0]]
    assert prof.vertex_counts.tolist() == [1, 1]
    assert np.allclose(prof.P, [[0, 0.5], [0.5, 0]])


def test_edge_profile_counts_loops_twice():
    prof = edge_profile(np.array([1, 0]), loopy_graph(), 2)
    # v0 (colour 1): two loop half-edges and one cross; v1 mirrored
    assert prof.counts.tolist() == [[2, 1], [1, 2]]


def test_edge_profile_row_marginals_exact():
    for s in range(5):
        g = sample_configuration_model(40, 3, seed=s)
        rng = derive_rng(s, "colours")
        colours = rng.integers(0, 3, size=g.n)
        prof = edge_profile(colours, g, 3)
        assert np.array_equal(prof.counts.sum(axis=1),
                              3 * prof.vertex_counts)
        assert np.array_equal(prof.counts, prof.counts.T)


def test_edge_profile_validation_catches_breakage():
    with pytest.raises(ValueError):
        EdgeProfile.from_counts(np.array([[1, 2], [1, 2]]),
                                np.array([1, 1]), n=2, d=3)  # asymmetric
    with pytest.raises(ValueError):
        EdgeProfile.from_counts(np.array([[0, 2], [2, 0]]),
                                np.array([1, 1]), n=2, d=3)  # bad marginal


def test_profile_csv_round_trip_exact():
    prof = edge_profile(np.array([1, 0]), loopy_graph(), 2)
    back = EdgeProfile.from_csv(prof.to_csv())
    assert back == prof
    assert np.array_equal(back.counts, prof.counts)


def test_profile_csv_round_trip_analytic():
    prof = EdgeProfile(P=np.array([[0.25, 0.25], [0.25, 0.25]]),
                       pi=np.array([0.5, 0.5]))
    back = EdgeProfile.from_csv(prof.to_csv())
    assert np.allclose(back.P, prof.P) and np.allclose(back.pi, prof.pi)


# --------------------------------------------------- entropy functional

def test_product_profile_functional_equals_marginal_entropy():
    rng = derive_rng(12, "product-profiles")
    for _ in range(200):
        q = int(rng.integers(2, 5))
        pi = rng.dirichlet(np.ones(q))
        prof = EdgeProfile(P=np.outer(pi, pi), pi=pi)
        for d in (3, 5):
            assert abs(entropy_functional(prof, d) - entropy(pi)) <= 1e-12


def test_functional_of_identity_profile_is_negative():
    # perfectly assortative colouring: H(P) = H(pi), functional
    # = (d/2 - d + 1) H(pi) < 0 for d >= 3, so not achievable by factors
    pi = np.array([0.5, 0.5])
    prof = EdgeProfile(P=np.diag(pi), pi=pi)
    assert entropy_functional(prof, 3) < 0


def test_entropy_check_deterministic_and_positive():
    factor = BernoulliFactor(p=0.3)
    a = entropy_check(factor, d=3, n=5000, trials=4, seed=11)
    b = entropy_check(factor, d=3, n=5000, trials=4, seed=11)
    assert a.values == b.values
    assert a.min_value > 0  # bernoulli sits well inside the region


# --------------------------------------------------- percolation stats

def test_percolation_identity_exact():
    # avdeg == d * density * corr, exactly, straight from the definitions
    for s in range(10):
        g = sample_configuration_model(100, 3, seed=s)
        rng = derive_rng(s, "perc-colours")
        colours = (rng.random(g.n) < 0.4).astype(int)
        ps = percolation_stats(colours, g)
        if ps.ones == 0:
            continue
        assert abs(ps.avdeg - g.d * ps.density * ps.corr) <= 1e-12


def test_percolation_stats_hand_case():
    g = triple_edge_graph()
    ps = percolation_stats(np.array([1, 1]), g)
    assert ps.density == 1.0
    assert ps.pair_ones == 6  # three edges, both directions
    assert ps.avdeg == 3.0
    assert list(ps.component_sizes.items()) == [(2, 1)]


def test_percolation_stats_empty_set():
    g = triple_edge_graph()
    ps = percolation_stats(np.array([0, 0]), g)
    assert ps.density == 0.0 and ps.corr == 0.0 and ps.avdeg == 0.0


def brute_components(g, in_set):
    comps = []
    todo = set(int(v) for v in np.nonzero(in_set)[0])
    while todo:
        start = todo.pop()
        comp = {start}
        frontier = [start]
        while frontier:
            u = frontier.pop()
            for w in g.head[u * g.d:(u + 1) * g.d]:
                w = int(w)
                if in_set[w] and w not in comp:
                    comp.add(w)
                    todo.discard(w)
                    frontier.append(w)
        comps.append(len(comp))
    return sorted(comps)


def test_component_sizes_match_brute_force():
    for s in range(10):
        g = sample_configuration_model(50, 3, seed=700 + s)
        rng = derive_rng(s, "comp-colours")
        in_set = rng.random(g.n) < 0.45
        ps = percolation_stats(in_set.astype(int), g)
        got = sorted(int(size)
                     for size, cnt in ps.component_sizes.items()
                     for _ in range(cnt))
        assert got == brute_components(g, in_set)


def test_component_degree_identity_on_forests():
    # every tree component of size m has average in-set degree 2(m-1)/m
    factor = LocalMinFactor()
    g = sample_configuration_model(5000, 3, seed=77)
    labels = sample_labels(g.n, seed=78)
    colours = factor.project(g, labels)
    deg = component_degree_check(colours, g)
    assert np.all(deg.is_tree)
    for size, avg in zip(deg.sizes, deg.avg_degree):
        assert abs(avg - 2 * (size - 1) / size) <= 1e-12
    assert deg.global_average < 2


def test_component_degree_check_counts_degrees():
    g = triple_edge_graph()
    deg = component_degree_check(np.array([1, 1]), g)
    assert deg.sizes.tolist() == [2]
    # 3 parallel in-set edges on 2 vertices: average degree 3
    assert deg.avg_degree.tolist() == [3.0]
    assert not deg.is_tree[0]

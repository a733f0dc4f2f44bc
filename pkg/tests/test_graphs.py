import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiidlab import kernels
from fiidlab._fallback import (cycle_counts as pure_cycle_counts,
                               inset_components as pure_inset_components,
                               tree_ball_flags as pure_tree_ball_flags)
from fiidlab.graphs import (RegularMultigraph, count_cycles,
                            enumerate_pairings, enumerate_pairings_array,
                            from_text, neighborhood,
                            sample_configuration_model, tree_ball_flags)
from fiidlab.rng import derive_rng


def double_factorial(m):
    out = 1
    while m > 1:
        out *= m
        m -= 2
    return out


# ------------------------------------------------------------- oracles
# Independent ball construction: explicit distance computation over the
# edge multiset, then count induced edges with multiplicity.

def brute_ball_is_tree(g, v, r):
    dist = {v: 0}
    frontier = [v]
    for depth in range(1, r + 1):
        nxt = []
        for u in frontier:
            for w in g.head[u * g.d:(u + 1) * g.d]:
                w = int(w)
                if w not in dist:
                    dist[w] = depth
                    nxt.append(w)
        frontier = nxt
    members = set(dist)
    edges = 0
    for h in range(g.n * g.d):
        hp = int(g.pairing[h])
        if h > hp:
            continue
        if h // g.d in members and hp // g.d in members:
            edges += 1
    return edges == len(members) - 1


def brute_cycle_counts(g, lmax):
    mult = Counter()
    loops = 0
    for h in range(g.n * g.d):
        hp = int(g.pairing[h])
        if h > hp:
            continue
        u, w = h // g.d, hp // g.d
        if u == w:
            loops += 1
        else:
            mult[(min(u, w), max(u, w))] += 1
    out = {1: loops}
    if lmax >= 2:
        out[2] = sum(m * (m - 1) // 2 for m in mult.values())
    if lmax >= 3:
        tri = 0
        for u in range(g.n):
            for v in range(u + 1, g.n):
                if not mult.get((u, v)):
                    continue
                for w in range(v + 1, g.n):
                    tri += (mult.get((u, v), 0) * mult.get((v, w), 0)
                            * mult.get((u, w), 0))
        out[3] = tri
    return out


# ------------------------------------------------------ pairing basics

@pytest.mark.parametrize("m", [2, 4, 6, 8])
def test_enumerate_pairings_count(m):
    table = enumerate_pairings_array(m)
    assert table.shape == (double_factorial(m - 1), m)


def test_enumerate_pairings_are_distinct_involutions():
    table = enumerate_pairings_array(6)
    seen = set()
    for row in table:
        seen.add(tuple(int(x) for x in row))
        for h in range(6):
            assert row[row[h]] == h
            assert row[h] != h
    assert len(seen) == len(table)


def test_enumerate_pairings_yields_valid_graphs():
    graphs = list(enumerate_pairings(2, 2))
    assert len(graphs) == 3
    for g in graphs:
        g.validate()
        assert np.all(g.degrees() == 2)


def test_configuration_model_shape():
    g = sample_configuration_model(100, 3, seed=5)
    g.validate()
    assert g.n == 100 and g.d == 3
    assert np.all(g.degrees() == 3)


def test_configuration_model_rejects_odd_total():
    with pytest.raises(ValueError):
        sample_configuration_model(5, 3, seed=0)


def test_configuration_model_seed_reproducible():
    a = sample_configuration_model(50, 4, seed=9)
    b = sample_configuration_model(50, 4, seed=9)
    assert a == b
    c = sample_configuration_model(50, 4, seed=10)
    assert a != c


def test_configuration_model_uniform_over_pairings():
    # n=2, d=2: 3 pairings, each with probability 1/3
    hits = Counter()
    for s in range(3000):
        g = sample_configuration_model(2, 2, seed=s)
        hits[tuple(int(x) for x in g.pairing)] += 1
    assert len(hits) == 3
    for count in hits.values():
        assert abs(count - 1000) < 4 * math.sqrt(3000 * (1 / 3) * (2 / 3))


# -------------------------------------------------------- serialization

@given(st.integers(min_value=0, max_value=2**31 - 1),
       st.sampled_from([(4, 2), (6, 3), (9, 2), (10, 3)]))
@settings(max_examples=40, deadline=None)
def test_text_round_trip(seed, shape):
    n, d = shape
    g = sample_configuration_model(n, d, seed=seed)
    assert from_text(g.to_text()) == g


def test_from_text_rejects_garbage():
    with pytest.raises(ValueError):
        from_text("")
    with pytest.raises(ValueError):
        from_text("2 2\n0 1\n1 2\n")  # half-edge 1 repeated
    with pytest.raises(ValueError):
        from_text("2 2\n0 0\n")  # self-paired


# ------------------------------------------------------------ the balls

@pytest.mark.parametrize("r", [0, 1, 2, 3])
def test_tree_flags_match_brute_force(r):
    for s in range(8):
        g = sample_configuration_model(24, 3, seed=100 + s)
        flags = tree_ball_flags(g, r)
        for v in range(g.n):
            assert flags[v] == brute_ball_is_tree(g, v, r), (s, v)


def test_neighborhood_structure():
    g = sample_configuration_model(30, 3, seed=2)
    for v in (0, 7, 29):
        ball = neighborhood(g, v, 2)
        assert ball.vertices[0] == v
        assert ball.depth[0] == 0 and ball.parent[0] == -1
        # BFS order: depths never decrease
        assert np.all(np.diff(ball.depth) >= 0)
        assert ball.is_tree == brute_ball_is_tree(g, v, 2)


def test_tree_flags_pure_backend_agrees():
    for s in range(5):
        g = sample_configuration_model(40, 4, seed=s)
        for r in (1, 2):
            a = kernels.tree_ball_flags(g.head, g.n, g.d, r)
            b = pure_tree_ball_flags(g.head, g.n, g.d, r)
            assert np.array_equal(a, b)


def test_inset_components_pure_backend_agrees():
    rng = derive_rng(77, "test-inset")
    for s in range(5):
        g = sample_configuration_model(60, 3, seed=s)
        in_set = rng.random(g.n) < 0.4
        a = kernels.inset_components(g.head, in_set, g.n, g.d)
        b = pure_inset_components(g.head, in_set, g.n, g.d)
        assert np.array_equal(a, b)


# ---------------------------------------------------------- cycle counts

def test_cycle_counts_match_brute_force():
    for s in range(40):
        g = sample_configuration_model(6, 3, seed=3000 + s)
        got = count_cycles(g, 3)
        want = brute_cycle_counts(g, 3)
        assert got[1] == want[1], s
        assert got[2] == want[2], s
        assert got[3] == want[3], s


def test_cycle_counts_backends_agree():
    for s in range(4):
        g = sample_configuration_model(30, 3, seed=s)
        a = kernels.cycle_counts(g.head, g.pairing, g.n, g.d, 5)
        b = pure_cycle_counts(g.head, g.pairing, g.n, g.d, 5)
        assert np.array_equal(a, b)


def test_cycle_counts_poisson_means():
    # counts of length-l cycles converge to Poisson((d-1)^l / (2l))
    d, n, seeds = 3, 2000, 250
    totals = np.zeros(3)
    for s in range(seeds):
        g = sample_configuration_model(n, d, seed=40_000 + s)
        c = count_cycles(g, 3)
        totals += [c[1], c[2], c[3]]
    means = totals / seeds
    for length in (1, 2, 3):
        lam = (d - 1) ** length / (2 * length)
        sigma = math.sqrt(lam / seeds)
        assert abs(means[length - 1] - lam) < 4 * sigma, (length, means)


def test_loop_count_matches_cycles_length_one():
    for s in range(10):
        g = sample_configuration_model(20, 4, seed=s)
        assert g.loop_count() == count_cycles(g, 1)[1]

"""Tests for the shared-mask coupling ensemble and its estimators.

Closed forms for the radius-0 coin factor are derived independently
here and used as oracles: with keep probability q and resample
probability p, a root vertex has Q in {1, q} depending on its mask
bit, so E*[Q^u] = (1-p) + p q^u, and the raw i-fold intersection is
(1-p) q + p q^i.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fiidlab.coupling import (
    CouplingEnsemble,
    _cond_moment,
    alpha_from_beta,
    beta_from_alpha,
    exchangeable_beta,
    intersection_densities,
    lemma_identity_check,
    qinq_functional,
    s_k,
    sample_ensemble,
    stability_moments,
    tune_p,
    word_profile,
)
from fiidlab.factors import make_factor
from fiidlab.graphs import RegularMultigraph, sample_configuration_model


def ring_plus_matching(n: int) -> RegularMultigraph:
    """Explicit loop-free 3-regular graph: an n-cycle plus the
    antipodal perfect matching.  Simple for even n >= 6."""
    assert n % 2 == 0 and n >= 6
    pairing = np.empty(3 * n, dtype=np.int64)
    for v in range(n):
        w = (v + 1) % n
        pairing[3 * v] = 3 * w + 1
        pairing[3 * w + 1] = 3 * v
        u = (v + n // 2) % n
        pairing[3 * v + 2] = 3 * u + 2
    return RegularMultigraph(n, 3, pairing)


def pair_count(ens: CouplingEnsemble, copy: int) -> int:
    in_set = ens.ys[copy] == 1
    tail = np.repeat(in_set, ens.d)
    return int(np.count_nonzero(tail & in_set[ens.g.head]))


# ---------------------------------------------------------------- ensemble

def test_ensemble_shapes_and_rederivation():
    g = sample_configuration_model(40, 3, seed=5)
    factor = make_factor("local_min")
    ens = sample_ensemble(factor, g, p=0.3, k=4, seed=11)
    assert ens.ys.shape == (5, 40)
    assert ens.mask.shape == (40,)
    assert ens.factor_spec == factor.spec_string()
    ens.validate(factor)


def test_ensemble_validate_catches_tampering():
    g = sample_configuration_model(30, 3, seed=2)
    factor = make_factor("bernoulli:p=0.5")
    ens = sample_ensemble(factor, g, p=0.5, k=2, seed=3)
    ens.ys[1, 0] = 1 - ens.ys[1, 0]
    with pytest.raises(ValueError, match="copy 1"):
        ens.validate(factor)


def test_ensemble_rejects_bad_parameters():
    g = sample_configuration_model(10, 3, seed=0)
    factor = make_factor("bernoulli:p=0.5")
    with pytest.raises(ValueError, match="p must be"):
        sample_ensemble(factor, g, p=1.5, k=2, seed=0)
    with pytest.raises(ValueError, match="k must be"):
        sample_ensemble(factor, g, p=0.5, k=0, seed=0)


def test_ensemble_reproducible():
    g = sample_configuration_model(50, 3, seed=9)
    factor = make_factor("nibble:rounds=1,rate=0.25")
    a = sample_ensemble(factor, g, p=0.4, k=3, seed=21)
    b = sample_ensemble(factor, g, p=0.4, k=3, seed=21)
    assert np.array_equal(a.ys, b.ys)
    assert np.array_equal(a.mask, b.mask)


def test_mask_and_copies_at_p_zero_and_one():
    g = ring_plus_matching(20)
    factor = make_factor("bernoulli:p=0.6")
    ens0 = sample_ensemble(factor, g, p=0.0, k=3, seed=7)
    assert not ens0.mask.any()
    # nothing is resampled, so every copy equals the base colouring
    assert np.array_equal(ens0.ys, np.tile(ens0.ys[0], (4, 1)))
    ens1 = sample_ensemble(factor, g, p=1.0, k=2, seed=7)
    assert ens1.mask.all()


def test_copy_marginals_match_base():
    # Y0 and each Y^i are exchangeable, so densities agree in mean.
    g = ring_plus_matching(200)
    factor = make_factor("bernoulli:p=0.45")
    base, third = [], []
    for s in range(60):
        ens = sample_ensemble(factor, g, p=0.5, k=3, seed=100 + s)
        base.append(ens.ys[0].mean())
        third.append(ens.ys[3].mean())
    diff = np.mean(base) - np.mean(third)
    se = math.sqrt((np.var(base) + np.var(third)) / 60)
    assert abs(diff) <= 4 * se + 1e-12


# ------------------------------------------------- intersection densities

def test_intersection_densities_match_direct_recount():
    g = sample_configuration_model(300, 3, seed=4)
    factor = make_factor("local_min")
    ens = sample_ensemble(factor, g, p=0.35, k=4, seed=8)
    dens = intersection_densities(ens)
    for i in range(1, 5):
        expect = np.logical_and.reduce(ens.ys[1:i + 1] == 1, axis=0).mean()
        assert dens.raw[i - 1] == pytest.approx(expect, abs=1e-15)
    scale = 3 / math.log(3)
    assert np.allclose(dens.alphas, dens.raw * scale)
    assert np.all(np.diff(dens.raw) <= 0)


def test_intersection_densities_bernoulli_closed_form():
    g = ring_plus_matching(4000)
    q, p = 0.6, 0.5
    factor = make_factor(f"bernoulli:p={q}")
    raws = []
    for s in range(30):
        ens = sample_ensemble(factor, g, p=p, k=3, seed=500 + s)
        raws.append(intersection_densities(ens).raw)
    mean = np.mean(raws, axis=0)
    se = np.std(raws, axis=0, ddof=1) / math.sqrt(30)
    for i in range(1, 4):
        target = (1 - p) * q + p * q ** i
        assert abs(mean[i - 1] - target) <= 4 * se[i - 1] + 1e-4


def test_intersection_validate_rejects_increasing():
    from fiidlab.coupling import IntersectionDensities
    bad = IntersectionDensities(k=2, d=3, raw=np.array([0.2, 0.3]),
                                alphas=np.array([0.2, 0.3]))
    with pytest.raises(ValueError, match="decreasing"):
        bad.validate()


# ----------------------------------------------------------- word profile

def test_word_profile_overlapping_words_vanish_for_independent_sets():
    # each copy of a local-min colouring is an independent set, so no
    # edge can have word bitmasks sharing a copy on both ends
    g = sample_configuration_model(500, 3, seed=13)
    ens = sample_ensemble(make_factor("local_min"), g, p=0.4, k=3, seed=6)
    prof = word_profile(ens)
    assert prof.P.shape == (8, 8)
    for s in range(8):
        for t in range(8):
            if s & t:
                assert prof.counts[s, t] == 0


def test_word_profile_subset_counts_bounded_by_copy_pairs():
    # an edge whose endpoint words both contain copy i lies inside
    # copy i's percolated set, so the exact counts nest
    g = ring_plus_matching(400)
    ens = sample_ensemble(make_factor("bernoulli:p=0.55"), g,
                          p=0.5, k=3, seed=17)
    prof = word_profile(ens)
    pairs = {i: pair_count(ens, i) for i in range(1, 4)}
    for i in range(1, 4):
        bit = 1 << (i - 1)
        total = sum(int(prof.counts[s, t])
                    for s in range(8) for t in range(8)
                    if (s & bit) and (t & bit))
        assert total == pairs[i]


def test_word_profile_k_cap():
    g = sample_configuration_model(20, 3, seed=1)
    ens = sample_ensemble(make_factor("bernoulli:p=0.5"), g,
                          p=0.5, k=9, seed=1)
    with pytest.raises(ValueError, match="k <= 8"):
        word_profile(ens)


# ---------------------------------------------------------- cond moments

def test_cond_moment_hand_values():
    # C(S, u) / C(m, u) for S=2, m=3, u=2 is 1/3
    assert _cond_moment(np.array([2]), 3, 2) == pytest.approx(1 / 3)
    assert _cond_moment(np.array([3]), 3, 2) == pytest.approx(1.0)
    assert _cond_moment(np.array([0, 3]), 3, 1) == pytest.approx(0.5)
    assert _cond_moment(np.array([5]), 10, 0) == 1.0
    # fractional u falls back to the plug-in power
    assert _cond_moment(np.array([4]), 8, 0.5) == pytest.approx(
        math.sqrt(0.5))
    with pytest.raises(ValueError, match="needs m"):
        _cond_moment(np.array([1]), 3, 4)


def test_cond_moment_unbiased_for_binomial():
    # E[C(S,u)/C(m,u)] = q^u when S ~ Binom(m, q)
    rng = np.random.default_rng(0)
    q, m, u = 0.7, 12, 3
    s = rng.binomial(m, q, size=200_000)
    est = _cond_moment(s, m, u)
    se = 1.5 / math.sqrt(len(s))   # generous envelope for the product stat
    assert abs(est - q ** u) <= 4 * se


# ------------------------------------------------------ stability moments

def test_stability_bernoulli_closed_form():
    g = ring_plus_matching(3000)
    q, p = 0.6, 0.4
    factor = make_factor(f"bernoulli:p={q}")
    est = stability_moments(factor, g, p=p, u_list=[1, 2, 3],
                            trials=12, seed=31, m=24)
    assert not est.failed
    for u in (1, 2, 3):
        target = (1 - p) + p * q ** u
        for route, se in ((est.ratio_est, est.ratio_se),
                          (est.cond_est, est.cond_se)):
            assert abs(route[u] - target) <= 4 * se[u] + 2e-3


def test_stability_two_routes_agree():
    g = sample_configuration_model(2000, 3, seed=3)
    factor = make_factor("local_min")
    est = stability_moments(factor, g, p=0.5, u_list=[2, 3],
                            trials=10, seed=77, m=24)
    for u in (2, 3):
        gap = abs(est.ratio_est[u] - est.cond_est[u])
        se = math.sqrt(est.ratio_se[u] ** 2 + est.cond_se[u] ** 2)
        assert gap <= 4 * se + 1e-3


def test_stability_endpoint_p_zero_is_exactly_one():
    g = sample_configuration_model(400, 3, seed=8)
    factor = make_factor("local_min")
    est = stability_moments(factor, g, p=0.0, u_list=[1, 2, 3],
                            trials=3, seed=5, m=12)
    for u in (1, 2, 3):
        assert est.ratio_est[u] == 1.0
        assert est.cond_est[u] == 1.0


def test_stability_endpoint_p_one_forgets_the_root():
    # full resampling: Q equals the plain keep probability
    g = ring_plus_matching(3000)
    q = 0.7
    factor = make_factor(f"bernoulli:p={q}")
    est = stability_moments(factor, g, p=1.0, u_list=[1, 2],
                            trials=10, seed=19, m=24)
    for u in (1, 2):
        assert abs(est.cond_est[u] - q ** u) <= 4 * est.cond_se[u] + 2e-3


def test_stability_fractional_moment_between_integer_neighbours():
    g = ring_plus_matching(2000)
    factor = make_factor("bernoulli:p=0.5")
    est = stability_moments(factor, g, p=0.6, u_list=[1, 1.5, 2],
                            trials=6, seed=23, m=24)
    assert est.cond_est[2] - 5e-3 <= est.cond_est[1.5] \
        <= est.cond_est[1] + 5e-3
    assert 1.5 not in est.ratio_est   # ratio route is integer-only


def test_stability_m_guard():
    g = sample_configuration_model(20, 3, seed=0)
    with pytest.raises(ValueError, match="m must exceed"):
        stability_moments(make_factor("bernoulli:p=0.5"), g, p=0.5,
                          u_list=[8], trials=1, seed=0, m=8)


# ----------------------------------------------------------------- tune_p

def test_tune_p_recovers_closed_form():
    # E*[Q] = (1-p) + p q is linear in p, so p* = (1-t)/(1-q)
    g = ring_plus_matching(4000)
    q = 0.5
    factor = make_factor(f"bernoulli:p={q}")
    target = 0.8
    p_star = (1 - target) / (1 - q)
    p_hat = tune_p(factor, g, u=1, target=target, tolerance=0.004, seed=41)
    assert abs(p_hat - p_star) <= 0.05


def test_tune_p_rejects_unreachable_target():
    g = ring_plus_matching(500)
    factor = make_factor("bernoulli:p=0.5")
    with pytest.raises(ValueError, match="outside attainable"):
        tune_p(factor, g, u=1, target=0.2, tolerance=0.01, seed=1)


# ------------------------------------------------------ subset transforms

def brute_alpha(beta: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros(1 << k)
    for s in range(1 << k):
        for t in range(1 << k):
            if t & s == s:
                out[s] += beta[t]
    return out


def test_alpha_from_beta_matches_superset_sums():
    rng = np.random.default_rng(2)
    for k in (1, 2, 3, 4):
        beta = rng.random(1 << k)
        assert np.allclose(alpha_from_beta(beta, k), brute_alpha(beta, k),
                           atol=1e-12)


@given(st.integers(min_value=1, max_value=6), st.integers())
@settings(max_examples=60, deadline=None)
def test_subset_transforms_round_trip(k, seed):
    rng = np.random.default_rng(seed % 2 ** 32)
    beta = rng.normal(size=1 << k)
    back = beta_from_alpha(alpha_from_beta(beta, k), k)
    assert np.allclose(back, beta, atol=1e-9)


def test_subset_transform_rejects_wrong_length():
    with pytest.raises(ValueError, match="subset entries"):
        alpha_from_beta(np.ones(7), 3)


def test_exchangeable_beta_layout():
    arr = exchangeable_beta([0.5, 0.2, 0.1], 3)
    assert arr[0] == 0.0
    assert arr[0b001] == arr[0b010] == arr[0b100] == 0.5
    assert arr[0b011] == arr[0b101] == arr[0b110] == 0.2
    assert arr[0b111] == 0.1
    with pytest.raises(ValueError, match="per subset size"):
        exchangeable_beta([0.5, 0.2], 3)


# ---------------------------------------------------- the subset identity

@given(st.integers(min_value=2, max_value=6), st.integers())
@settings(max_examples=80, deadline=None)
def test_identity_on_random_exchangeable_weights(k, seed):
    rng = np.random.default_rng(seed % 2 ** 32)
    by_size = rng.random(k) / (1 << k)   # keep masses summable to < 1
    lhs, rhs = lemma_identity_check(exchangeable_beta(by_size, k), k)
    assert abs(lhs - rhs) <= 1e-10


def test_identity_hand_value_k2():
    # beta: singletons b1, pair b2.  lhs = 2 b1 + b2 - half the sum of
    # products over intersecting subset pairs; rhs from alpha_1, alpha_2.
    b1, b2 = 0.3, 0.1
    beta = exchangeable_beta([b1, b2], 2)
    lhs, rhs = lemma_identity_check(beta, 2)
    inter = (2 * b1 * b1 + b2 * b2 + 4 * b1 * b2  # {1}{1},{2}{2},{12} terms
             + b2 * b2 * 0)                       # spelled out below
    # intersecting ordered pairs: (1,1),(2,2),(12,12),(1,12),(12,1),
    # (2,12),(12,2) -> b1^2 + b1^2 + b2^2 + 4 b1 b2
    inter = 2 * b1 ** 2 + b2 ** 2 + 4 * b1 * b2
    expect_lhs = 2 * b1 + b2 - 0.5 * inter
    assert lhs == pytest.approx(expect_lhs, abs=1e-14)
    a1, a2 = b1 + b2, b2
    expect_rhs = 2 * (a1 - a1 ** 2 / 2) - (a2 - a2 ** 2 / 2)
    assert rhs == pytest.approx(expect_rhs, abs=1e-14)
    assert lhs == pytest.approx(rhs, abs=1e-12)


def test_identity_rejects_non_exchangeable():
    beta = np.zeros(4)
    beta[0b01], beta[0b10], beta[0b11] = 0.3, 0.2, 0.1
    with pytest.raises(ValueError, match="not exchangeable"):
        lemma_identity_check(beta, 2)


def test_identity_ignores_empty_set_mass():
    by_size = [0.2, 0.05]
    beta = exchangeable_beta(by_size, 2)
    shifted = beta.copy()
    shifted[0] = 0.7
    assert lemma_identity_check(beta, 2) == \
        lemma_identity_check(shifted, 2)


# ------------------------------------------------------------ s_k / qinq

def test_s_k_values_and_closed_form():
    assert s_k(0.0, 4) == 4.0
    assert s_k(1.0, 4) == 1.0
    assert s_k(0.5, 1) == 1.0
    rng = np.random.default_rng(3)
    x = rng.uniform(0.01, 1.0, size=50)
    for k in (2, 3, 5):
        closed = (1 - (1 - x) ** k) / x
        assert np.allclose(s_k(x, k), closed, atol=1e-12)
    with pytest.raises(ValueError, match="defined on"):
        s_k(1.2, 3)
    with pytest.raises(ValueError, match="k must be"):
        s_k(0.5, 0)


def test_qinq_functional_degenerate_inputs():
    ones = np.ones(10)
    a1 = 0.5
    assert qinq_functional(a1, ones, ones, 4) == pytest.approx(
        a1 - a1 ** 2 / 2)
    # Q = R = 0 gives s_k(0) = k on both terms
    zeros = np.zeros(10)
    assert qinq_functional(a1, zeros, zeros, 4) == pytest.approx(
        a1 * 4 - a1 ** 2 / 2 * 4)

"""Polar transform, reliability construction, information sets and SC decoding."""

import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from channels import bec, biawgn, bsc, llrs, transmit
from polar_core import (
    InformationSet,
    MetricKind,
    ReliabilityProfile,
    bec_reliability,
    brute_force_bit_channel,
    brute_force_error_probability,
    gaussian_reliability,
    genie_leaf_llrs,
    gf2_rank,
    monte_carlo_reliability,
    nested_information_sets,
    polar_matrix,
    polar_transform,
    profile_document,
    reliability_for,
    reliability_order,
    sc_decode,
    select_information_set,
)

F = np.array([[1, 0], [1, 1]], dtype=np.uint8)


def _noiseless_llrs(x):
    return (1.0 - 2.0 * np.asarray(x, dtype=np.float64)) * 500.0


class TestTransform:

    @pytest.mark.parametrize("n", [1, 2, 4, 8, 16])
    def test_matches_kronecker_power(self, n):
        P = np.ones((1, 1), dtype=np.uint8)
        while P.shape[0] < n:
            P = np.kron(P, F)
        assert_array_equal(polar_matrix(n), P)

    def test_rows(self):
        assert_array_equal(polar_transform([1, 0, 0, 0]), [1, 0, 0, 0])
        assert_array_equal(polar_transform([0, 1, 0, 0]), [1, 1, 0, 0])
        assert_array_equal(polar_transform([0, 0, 0, 1]), [1, 1, 1, 1])

    def test_involution_on_batches(self):
        u = np.random.default_rng(0).integers(0, 2, (5, 32), dtype=np.uint8)
        assert_array_equal(polar_transform(polar_transform(u)), u)

    def test_input_untouched(self):
        u = np.array([0, 0, 0, 1], dtype=np.uint8)
        polar_transform(u)
        assert_array_equal(u, [0, 0, 0, 1])

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ValueError):
            polar_transform(np.zeros(6, dtype=np.uint8))

    def test_gf2_rank(self):
        assert gf2_rank(polar_matrix(8)) == 8
        assert gf2_rank(np.array([[1, 1], [1, 1]])) == 1
        assert gf2_rank(np.array([[1, 0, 1], [0, 1, 1], [1, 1, 0]])) == 2


class TestBecReliability:

    def test_golden_profile(self, data_dir):
        golden = json.loads((data_dir / "bec_0.5_n4.json").read_text(encoding="utf-8"))
        profile = bec_reliability([0.5] * 4)
        info = select_information_set(profile, 1)
        assert profile_document(profile, info) == golden

    def test_erasure_mass_conserved(self):
        profile = bec_reliability([0.3] * 64)
        assert profile.as_array().sum() == pytest.approx(64 * 0.3)

    def test_punctured_position(self):
        profile = bec_reliability([1.0, 0.5, 0.5, 0.5])
        assert_allclose(profile.metric, [1.0, 0.75, 0.625, 0.125])

    def test_reliability_for_uses_pattern(self):
        profile = reliability_for(bec(0.5), 4, [0, 1, 1, 1])
        assert profile.metric_kind is MetricKind.ERASURE_PROB
        assert_allclose(profile.metric, [1.0, 0.75, 0.625, 0.125])

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            bec_reliability([0.5, 1.5])

    def test_monotone_in_erasure(self):
        rng = np.random.default_rng(41)
        for n_u in (2, 8, 64):
            for _ in range(50):
                low = rng.random(n_u)
                high = np.minimum(1.0, low + rng.random(n_u) * rng.integers(0, 2, n_u))
                assert (bec_reliability(high).as_array() >= bec_reliability(low).as_array()).all()


class TestBruteForceOracle:

    @pytest.mark.parametrize("eps", [0.2, 0.5, 0.8])
    @pytest.mark.parametrize("n_u", [2, 4, 8])
    @pytest.mark.parametrize("punctured", [False, True])
    def test_matches_bec_recursion(self, eps, n_u, punctured):
        sent = np.ones(n_u, dtype=int)
        if punctured:
            sent[0] = 0
        exact = reliability_for(bec(eps), n_u, sent).as_array()
        oracle = [brute_force_bit_channel(bec(eps), n_u, sent, j) for j in range(1, n_u + 1)]
        assert_allclose(oracle, exact, atol=1e-12)

    @pytest.mark.parametrize("n_u", [2, 4, 8])
    @pytest.mark.parametrize("punctured", [False, True])
    def test_noiseless_bsc(self, n_u, punctured):
        sent = np.ones(n_u, dtype=int)
        if punctured:
            sent[n_u // 2] = 0
        expected = bec_reliability(np.where(sent == 1, 0.0, 1.0)).as_array()
        oracle = [brute_force_bit_channel(bsc(0.0), n_u, sent, j) for j in range(1, n_u + 1)]
        assert_allclose(oracle, expected, atol=1e-12)

    def test_limits(self):
        with pytest.raises(ValueError):
            brute_force_bit_channel(bec(0.5), 16, None, 1)
        with pytest.raises(ValueError):
            brute_force_bit_channel(biawgn(1.0), 4, None, 1)
        with pytest.raises(ValueError):
            brute_force_bit_channel(bec(0.5), 4, None, 5)


class TestGaussianApproximation:

    def test_last_channel_collects_all_means(self):
        sigma = 0.8
        profile = gaussian_reliability(sigma, 16)
        assert profile.metric[-1] == pytest.approx(16 * 2.0 / sigma ** 2)
        assert profile.metric[0] == min(profile.metric)
        assert profile.smaller_is_better is False

    def test_punctured_positions_are_useless(self):
        pattern = [0, 1, 1, 1]
        profile = gaussian_reliability(1.0, 4, pattern)
        # the first bit-channel sees the punctured coordinate through every check
        assert profile.metric[0] == 0.0
        assert all(m > 0 for m in profile.metric[1:])

    def test_same_order_as_bec_for_small_codes(self):
        ga = select_information_set(gaussian_reliability(0.9, 8), 4)
        assert ga.indices == (4, 6, 7, 8)

    def test_large_means_stay_finite(self):
        profile = gaussian_reliability(0.2, 1024)
        assert np.isfinite(profile.as_array()).all()

    @pytest.mark.parametrize("sigma", [0.3, 0.8, 1.5, 4.0])
    def test_one_step_bounds(self, sigma):
        m = 2.0 / sigma ** 2
        minus, plus = gaussian_reliability(sigma, 2).metric
        assert 0.0 <= minus <= m
        assert plus == pytest.approx(2 * m)

    def test_fully_punctured(self):
        assert gaussian_reliability(1.0, 8, [0] * 8).metric == (0.0,) * 8


class TestMonteCarlo:

    def test_bec_half_error_on_erasure(self):
        profile = monte_carlo_reliability(bec(0.5), 4, trials=20_000, rng=np.random.default_rng(3))
        exact = bec_reliability([0.5] * 4).as_array()
        assert_allclose(profile.as_array(), exact / 2, atol=0.02)

    def test_seeded(self):
        a = monte_carlo_reliability(bsc(0.1), 8, trials=500, rng=np.random.default_rng(9))
        b = monte_carlo_reliability(bsc(0.1), 8, trials=500, rng=np.random.default_rng(9))
        assert a == b

    def test_bsc_matches_exact_enumeration(self):
        ch = bsc(0.11)
        profile = monte_carlo_reliability(ch, 8, trials=40_000, rng=np.random.default_rng(12))
        exact = [brute_force_error_probability(ch, 8, None, j) for j in range(1, 9)]
        assert exact[1] == pytest.approx(0.315, abs=5e-3)
        assert_allclose(profile.as_array(), exact, atol=0.015)

    @pytest.mark.parametrize("rule", ["tanh", "minsum"])
    def test_mirrored_bsc_llrs_tie_exactly(self, rule):
        rng = np.random.default_rng(13)
        y = transmit(bsc(0.11), np.zeros((2000, 8), dtype=np.uint8), rng)
        leaf = genie_leaf_llrs(llrs(bsc(0.11), y), np.zeros((2000, 8), dtype=np.uint8), rule=rule)
        assert not ((leaf != 0) & (np.abs(leaf) < 1e-9)).any()
        assert (leaf[:, 1] == 0).any()

    def test_genie_leaf_sign(self):
        rng = np.random.default_rng(4)
        u = rng.integers(0, 2, (3, 8), dtype=np.uint8)
        leaf = genie_leaf_llrs(_noiseless_llrs(polar_transform(u)), u)
        assert_array_equal(leaf < 0, u.astype(bool))


class TestInformationSets:

    def test_ties_prefer_larger_index(self):
        profile = ReliabilityProfile(
            n_u=4, metric=(0.5, 0.5, 0.5, 0.5), metric_kind=MetricKind.ERASURE_PROB, smaller_is_better=True
        )
        assert select_information_set(profile, 2).indices == (3, 4)
        assert_array_equal(reliability_order(profile), [3, 2, 1, 0])

    def test_nested_family(self):
        profiles = [bec_reliability([0.3] * 64), bec_reliability([0.6] * 64)]
        family = nested_information_sets(profiles, [40, 20])
        assert family.sizes == (40, 20)
        assert set(family.sets[1].indices) < set(family.sets[0].indices)

    def test_equal_sizes_allowed(self):
        profiles = [bec_reliability([0.3] * 8)] * 2
        family = nested_information_sets(profiles, [3, 3])
        assert family.sets[0] == family.sets[1]

    def test_increasing_sizes_rejected(self):
        profiles = [bec_reliability([0.3] * 8), bec_reliability([0.6] * 8)]
        with pytest.raises(ValueError):
            nested_information_sets(profiles, [2, 4])

    @pytest.mark.parametrize("eps", [(0.3, 0.6), (0.2, 0.4, 0.7)])
    def test_degraded_good_sets_nest(self, eps):
        # positions good for a degraded BEC stay good for the better one
        profiles = [bec_reliability([e] * 256).as_array() for e in eps]
        for better, worse in zip(profiles, profiles[1:]):
            for delta in (1e-3, 1e-2, 0.1, 0.5):
                assert set(np.nonzero(worse <= delta)[0]) <= set(np.nonzero(better <= delta)[0])

    @pytest.mark.parametrize("eps", [(0.3, 0.6), (0.2, 0.4, 0.7)])
    def test_capacity_proportional_chain(self, eps):
        n_u = 256
        sizes = [int(n_u * (1 - e) * 0.9) for e in eps]
        family = nested_information_sets([bec_reliability([e] * n_u) for e in eps], sizes)
        assert family.sizes == tuple(sizes)
        for big, small in zip(family.sets, family.sets[1:]):
            assert set(small.indices) < set(big.indices)

    def test_worse_channel_top_sets_nest_in_better(self):
        n_u = 256
        rng = np.random.default_rng(47)
        for eps in ((0.3, 0.6), (0.2, 0.4, 0.7)):
            profiles = [bec_reliability([e] * n_u) for e in eps]
            nested = 0
            for _ in range(50):
                scale = rng.uniform(0.3, 1.0)
                sizes = [max(1, int(n_u * (1 - e) * scale)) for e in eps]
                worse = set(select_information_set(profiles[-1], sizes[-1]).indices)
                better = set(select_information_set(profiles[-2], sizes[-2]).indices)
                nested += worse <= better
                family = nested_information_sets(profiles, sizes)
                for big, small in zip(family.sets, family.sets[1:]):
                    assert set(small.indices) <= set(big.indices)
            assert nested >= 48

    def test_information_set_validation(self):
        with pytest.raises(ValueError):
            InformationSet(n_u=4, indices=(3, 2))
        with pytest.raises(ValueError):
            InformationSet(n_u=4, indices=(0, 1))


class TestSuccessiveCancellation:

    @pytest.mark.parametrize("rule", ["tanh", "minsum"])
    def test_noiseless_round_trip(self, rule):
        rng = np.random.default_rng(11)
        info = select_information_set(bec_reliability([0.4] * 32), 16)
        v = np.zeros((6, 32), dtype=np.uint8)
        v[:, info.zero_based()] = rng.integers(0, 2, (6, 16), dtype=np.uint8)
        x = polar_transform(v)
        res = sc_decode(_noiseless_llrs(x), None, info, rule=rule)
        assert_array_equal(res.u_hat, v)
        assert_array_equal(res.codeword, x)
        assert res.confident.all()

    def test_single_vector(self):
        info = InformationSet(n_u=4, indices=(4,))
        x = polar_transform([0, 0, 0, 1])
        res = sc_decode(_noiseless_llrs(x), None, info)
        assert_array_equal(res.info_bits, [1])
        assert res.confident is True

    def test_ties_decide_zero(self):
        res = sc_decode(np.zeros(8), None, [5, 6, 7, 8])
        assert_array_equal(res.info_bits, [0, 0, 0, 0])
        assert res.confident is False

    def test_frozen_values(self):
        v = np.array([1, 0, 0, 1], dtype=np.uint8)
        llr = _noiseless_llrs(polar_transform(v))
        res = sc_decode(llr, {1: 1, 2: 0, 3: 0}, [4])
        assert_array_equal(res.u_hat, v)

    def test_frozen_partition_checked(self):
        with pytest.raises(ValueError):
            sc_decode(np.zeros(4), {1: 0}, [4])

    def test_bec_decoding_over_channel(self):
        rng = np.random.default_rng(21)
        info = select_information_set(bec_reliability([0.2] * 64), 16)
        v = np.zeros((200, 64), dtype=np.uint8)
        v[:, info.zero_based()] = rng.integers(0, 2, (200, 16), dtype=np.uint8)
        y = transmit(bec(0.2), polar_transform(v), rng)
        res = sc_decode(llrs(bec(0.2), y), None, info)
        correct = (res.u_hat == v).all(axis=1)
        # on erasure channels a confident decision is always correct
        assert correct[res.confident].all()
        assert correct.mean() > 0.9

    def test_two_node_example(self):
        # x = (u1 ^ u2, u2): (+5, -5) disagree about u2 once u1 = 0 is known
        res = sc_decode(np.array([5.0, -5.0]), {1: 0}, [2])
        assert_array_equal(res.info_bits, [0])
        assert res.confident is False
        res = sc_decode(np.array([-5.0, -5.0]), {1: 0}, [2])
        assert_array_equal(res.info_bits, [1])
        assert_array_equal(res.codeword, [1, 1])
        assert res.confident is True

    def test_info_positions_as_array(self):
        x = polar_transform([0, 0, 0, 1])
        res = sc_decode(_noiseless_llrs(x), None, np.array([3, 4]))
        assert_array_equal(res.info_bits, [0, 1])
        assert sc_decode(np.zeros(4), None, np.array([], dtype=int)).info_bits.size == 0

    def test_bad_rule(self):
        with pytest.raises(ValueError):
            sc_decode(np.zeros(4), None, [4], rule="exact")

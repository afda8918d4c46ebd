"""Channel models, LLRs, capacity and degradation checks."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from channels import (
    ChannelError,
    ChannelKind,
    assert_degraded_sequence,
    bec,
    biawgn,
    binary_entropy,
    bsc,
    capacity,
    ebn0_from_sigma,
    llr,
    llrs,
    parse_channel,
    sample_output,
    sigma_from_ebn0,
    transmit,
)
from config import LLR_CLIP


class TestParsing:

    @pytest.mark.parametrize("text, kind, param", [
        ("bec:0.3", ChannelKind.BEC, 0.3),
        ("BSC:0.11", ChannelKind.BSC, 0.11),
        ("biawgn:0.9", ChannelKind.BIAWGN, 0.9),
    ])
    def test_parse(self, text, kind, param):
        ch = parse_channel(text)
        assert ch.kind is kind
        assert ch.param == param
        assert parse_channel(ch.spec_string) == ch

    @pytest.mark.parametrize("text", ["bec", "bec:1.5", "bsc:0.7", "biawgn:0", "awgn:1.0", "bec:abc"])
    def test_invalid(self, text):
        with pytest.raises(ChannelError):
            parse_channel(text)

    def test_models_are_hashable(self):
        assert len({bec(0.3), bec(0.3), bsc(0.3)}) == 2


class TestLLR:

    def test_bec(self):
        out = llrs(bec(0.5), np.array([0.0, 1.0, np.nan]))
        assert_array_equal(out, [LLR_CLIP, -LLR_CLIP, 0.0])

    def test_bsc(self):
        assert llr(bsc(0.1), 0.0) == pytest.approx(math.log(9.0))
        assert llr(bsc(0.1), 1.0) == pytest.approx(-math.log(9.0))
        assert llr(bsc(0.0), 1.0) == -LLR_CLIP
        assert llr(bsc(0.5), 0.0) == 0.0

    def test_biawgn(self):
        y = np.array([0.5, -1.2])
        assert_allclose(llrs(biawgn(0.8), y), 2.0 * y / 0.64)

    def test_erasure_only_on_bec(self):
        with pytest.raises(ChannelError):
            llrs(biawgn(1.0), np.array([np.nan]))


class TestTransmit:

    def test_noiseless(self):
        rng = np.random.default_rng(0)
        x = rng.integers(0, 2, 64, dtype=np.uint8)
        assert_array_equal(transmit(bec(0.0), x, rng), x)
        assert_array_equal(transmit(bsc(0.0), x, rng), x)

    def test_full_erasure(self):
        y = transmit(bec(1.0), np.zeros(32, dtype=np.uint8), np.random.default_rng(1))
        assert np.isnan(y).all()

    def test_bpsk_mapping(self):
        y = transmit(biawgn(1e-9), np.array([0, 1], dtype=np.uint8), np.random.default_rng(2))
        assert_allclose(y, [1.0, -1.0], atol=1e-6)

    def test_seeded(self):
        x = np.zeros((4, 16), dtype=np.uint8)
        a = transmit(bsc(0.3), x, np.random.default_rng(5))
        b = transmit(bsc(0.3), x, np.random.default_rng(5))
        assert_array_equal(a, b)

    def test_crossover_rate(self):
        y = transmit(bsc(0.2), np.zeros(40_000, dtype=np.uint8), np.random.default_rng(3))
        assert y.mean() == pytest.approx(0.2, abs=0.01)

    def test_sample_output(self):
        assert sample_output(bsc(0.0), 1, np.random.default_rng(0)) == 1.0
        with pytest.raises(ChannelError):
            sample_output(bsc(0.1), 2, np.random.default_rng(0))


class TestCapacity:

    def test_bec(self):
        assert capacity(bec(0.3)) == pytest.approx(0.7)

    def test_bsc(self):
        assert capacity(bsc(0.0)) == pytest.approx(1.0)
        assert capacity(bsc(0.5)) == pytest.approx(0.0, abs=1e-12)
        assert capacity(bsc(0.11)) == pytest.approx(1.0 - binary_entropy(0.11))

    def test_entropy(self):
        assert binary_entropy(0.5) == pytest.approx(1.0)
        assert binary_entropy(0.0) == 0.0

    def test_biawgn(self):
        # BPSK at Es/N0 = 0 dB
        assert capacity(biawgn(1.0)) == pytest.approx(0.486, abs=5e-3)
        assert capacity(biawgn(0.05)) == pytest.approx(1.0, abs=1e-6)

    def test_biawgn_decreasing(self):
        caps = [capacity(biawgn(s)) for s in (0.5, 0.8, 1.0, 1.5, 3.0)]
        assert all(a > b for a, b in zip(caps, caps[1:]))


class TestEbN0:

    def test_unit_sigma(self):
        assert sigma_from_ebn0(0.0, 0.5) == pytest.approx(1.0)

    def test_inverse(self):
        sigma = sigma_from_ebn0(2.5, 0.75)
        assert ebn0_from_sigma(sigma, 0.75) == pytest.approx(2.5)

    def test_bad_rate(self):
        with pytest.raises(ChannelError):
            sigma_from_ebn0(1.0, 0.0)


class TestDegradation:

    def test_ordered(self):
        assert assert_degraded_sequence([bec(0.3), bec(0.6)])
        assert assert_degraded_sequence([biawgn(0.8), biawgn(0.8), biawgn(1.1)])
        assert assert_degraded_sequence([])

    def test_reversed(self):
        assert not assert_degraded_sequence([bsc(0.2), bsc(0.1)])

    def test_mixed_families(self):
        with pytest.raises(ChannelError):
            assert_degraded_sequence([bec(0.3), bsc(0.1)])


class TestEmpiricalLaw:

    N = 100_000

    def _within_three_se(self, observed, p):
        se = math.sqrt(p * (1.0 - p) / self.N)
        assert abs(observed - p) <= 3 * se

    def test_bec_erasure_frequency(self):
        y = transmit(bec(0.3), np.zeros(self.N, dtype=np.uint8), np.random.default_rng(31))
        self._within_three_se(np.isnan(y).mean(), 0.3)

    def test_bsc_crossover_frequency(self):
        x = np.random.default_rng(32).integers(0, 2, self.N, dtype=np.uint8)
        y = transmit(bsc(0.11), x, np.random.default_rng(33))
        self._within_three_se((y != x).mean(), 0.11)

    def test_biawgn_mean(self):
        y = transmit(biawgn(0.5), np.zeros(self.N, dtype=np.uint8), np.random.default_rng(34))
        assert y.mean() == pytest.approx(1.0, abs=0.01)
        assert y.std() == pytest.approx(0.5, abs=0.01)


class TestLLRSymmetry:

    def test_bsc(self):
        for p in (0.0, 0.05, 0.11, 0.3, 0.5):
            assert llr(bsc(p), 0.0) == -llr(bsc(p), 1.0)

    def test_biawgn(self):
        y = np.random.default_rng(35).normal(0.0, 3.0, 1000)
        for sigma in (0.05, 0.5, 1.3):
            assert_array_equal(llrs(biawgn(sigma), y), -llrs(biawgn(sigma), -y))

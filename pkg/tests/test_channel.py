"""Tests for the real-valued MIMO-NOMA channel."""

import math

import numpy as np
import pytest

from muira.channel import (
    ChannelRealization,
    corrupt_csi,
    modulate_bpsk,
    per_symbol,
    sample_channel,
    transmit,
    with_estimation_error,
)
from muira.exceptions import ConfigError
from muira.models import CsiModel, SystemDims

# =============================================================================
# Fading draws
# =============================================================================


@pytest.mark.unit
class TestSampleChannel:
    def test_block_fading_covers_symbols(self):
        """400 symbols at coherence 200 give two matrices of 200 slots each."""
        blocks = sample_channel(SystemDims(K=8, M=8), 400, 200, rng_seed=1)
        assert len(blocks) == 2
        assert [(b.start, b.stop) for b in blocks] == [(0, 200), (200, 400)]
        assert not np.array_equal(blocks[0].H, blocks[1].H)

    def test_fast_fading_one_matrix_per_symbol(self):
        blocks = sample_channel(SystemDims(K=2, M=3), 3, 1, rng_seed=1)
        assert len(blocks) == 3
        assert all(b.H.shape == (3, 2) for b in blocks)

    def test_last_block_is_short(self):
        blocks = sample_channel(SystemDims(K=2, M=2), 450, 200, rng_seed=3)
        assert [b.n_symbols for b in blocks] == [200, 200, 50]

    def test_same_seed_is_identical(self):
        dims = SystemDims(K=4, M=2)
        a = sample_channel(dims, 50, 10, rng_seed=9)
        b = sample_channel(dims, 50, 10, rng_seed=9)
        for x, y in zip(a, b, strict=True):
            assert np.array_equal(x.H, y.H)

    def test_entries_are_standard_normal(self):
        """Sample mean and variance within 4 sigma of N(0, 1)."""
        blocks = sample_channel(SystemDims(K=8, M=8), 2000, 1, rng_seed=2)
        h = np.concatenate([b.H.ravel() for b in blocks])
        n = h.size
        assert abs(h.mean()) < 4.0 / math.sqrt(n)
        assert abs(h.var() - 1.0) < 4.0 * math.sqrt(2.0 / n)

    def test_rejects_zero_coherence(self):
        with pytest.raises(ConfigError):
            sample_channel(SystemDims(K=1, M=1), 10, 0, rng_seed=0)

    def test_per_symbol_expansion(self):
        blocks = sample_channel(SystemDims(K=2, M=3), 5, 2, rng_seed=0)
        stack = per_symbol(blocks)
        assert stack.shape == (5, 3, 2)
        assert np.array_equal(stack[0], stack[1])
        assert np.array_equal(stack[4], blocks[2].H)


# =============================================================================
# Modulation and transmission
# =============================================================================


@pytest.mark.unit
class TestTransmit:
    def test_bpsk_mapping(self):
        assert modulate_bpsk(np.array([0, 1, 1])).tolist() == [1.0, -1.0, -1.0]

    def test_bpsk_all_zero(self):
        assert np.all(modulate_bpsk(np.zeros(8, dtype=int)) == 1.0)

    def test_bpsk_rejects_non_binary(self):
        with pytest.raises(ConfigError):
            modulate_bpsk(np.array([0, 2]))

    def test_noiseless_scalar(self):
        block = ChannelRealization(H=np.array([[2.0]]), sigma_n=0.0, coherence_len=1, start=0, stop=1)
        Y = transmit(np.array([[1.0]]), [block], rng_seed=0)
        assert Y.tolist() == [[2.0]]

    def test_noise_statistics(self):
        """Residual Y - HX has the configured variance."""
        dims = SystemDims(K=2, M=4)
        blocks = sample_channel(dims, 5000, 100, rng_seed=1, sigma_n=0.5)
        X = modulate_bpsk(np.random.default_rng(0).integers(0, 2, (2, 5000)))
        Y = transmit(X, blocks, rng_seed=2)
        clean = np.concatenate([b.H @ X[:, b.start : b.stop] for b in blocks], axis=1)
        resid = Y - clean
        assert abs(resid.var() - 0.25) < 0.01

    def test_shape_mismatch(self):
        blocks = sample_channel(SystemDims(K=2, M=2), 4, 4, rng_seed=0)
        with pytest.raises(ConfigError):
            transmit(np.ones((3, 4)), blocks, rng_seed=0)

    def test_length_mismatch(self):
        blocks = sample_channel(SystemDims(K=2, M=2), 4, 4, rng_seed=0)
        with pytest.raises(ConfigError):
            transmit(np.ones((2, 5)), blocks, rng_seed=0)


# =============================================================================
# Channel estimation error
# =============================================================================


@pytest.mark.unit
class TestCsi:
    def test_perfect_csi_is_exact(self):
        H = np.random.default_rng(0).standard_normal((4, 4))
        assert np.array_equal(corrupt_csi(H, CsiModel(), rng_seed=1), H)

    @pytest.mark.parametrize("variance", [0.01, 0.04])
    def test_error_variance(self, variance):
        H = np.zeros((200, 200))
        E = corrupt_csi(H, CsiModel(error_variance=variance), rng_seed=3)
        n = E.size
        assert abs(E.var() - variance) < 4.0 * variance * math.sqrt(2.0 / n)
        assert abs(E.mean()) < 4.0 * math.sqrt(variance / n)

    def test_negative_variance_rejected(self):
        with pytest.raises(ValueError):
            CsiModel(error_variance=-0.1)

    def test_blocks_keep_true_channel(self):
        blocks = sample_channel(SystemDims(K=2, M=2), 20, 10, rng_seed=4)
        noisy = with_estimation_error(blocks, CsiModel(error_variance=0.04), rng_seed=5)
        for before, after in zip(blocks, noisy, strict=True):
            assert np.array_equal(before.H, after.H)
            assert not np.array_equal(after.receiver_H, after.H)

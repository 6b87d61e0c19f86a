"""Tests for MU-IRA construction, encoding and the message-passing decoder."""

import itertools

import numpy as np
import pytest
from scipy.special import logsumexp

from muira.codec import (
    DecoderState,
    build_code,
    build_code_from_degrees,
    checks_satisfied,
    code_rate,
    decode_activation,
    encode,
    hard_decision,
    modulate,
    operation_counts,
    quantize_degrees,
    syndrome_ok,
    to_codeword_order,
    to_symbol_order,
)
from muira.exceptions import CodeConstructionError, ConfigError, NumericalError
from muira.models import CodeParams, DegreeDistribution
from muira.presets import get_preset, list_presets


def _map_llrs(instance, channel_llrs):
    """Exhaustive MAP posteriors of info and codeword bits for one user."""
    N = instance.info_len
    words = np.array(list(itertools.product((0, 1), repeat=N)), dtype=np.int8)
    codewords = encode(instance, words)
    metric = ((1.0 - 2.0 * codewords) * channel_llrs / 2.0).sum(axis=1)

    def posterior(bits):
        return logsumexp(metric[bits == 0]) - logsumexp(metric[bits == 1])

    info = np.array([posterior(words[:, n]) for n in range(N)])
    code = np.array([posterior(codewords[:, i]) for i in range(codewords.shape[1])])
    return info, code


# =============================================================================
# Rate and construction
# =============================================================================


@pytest.mark.unit
class TestCodeRate:
    def test_full_loading_rate(self, full_loading_code):
        assert abs(code_rate(full_loading_code) - 0.1992) < 5e-4
        assert abs(code_rate(full_loading_code) - 0.2) < 1e-3

    def test_all_degree_two(self):
        params = CodeParams(q=1, alpha=1, lambda_=DegreeDistribution.normalized({2: 1.0}))
        assert code_rate(params) == pytest.approx(1.0 / 3.0)

    def test_severe_loading_rate(self):
        assert abs(code_rate(get_preset("mu-k64m8-r0.1").params) - 0.1) < 5e-3

    def test_q_above_q_max_rejected(self):
        with pytest.raises(ValueError):
            CodeParams(q=6, alpha=1, lambda_=DegreeDistribution.normalized({3: 1.0}))


@pytest.mark.unit
class TestBuildCode:
    def test_hand_counted_lengths(self):
        params = CodeParams(q=2, alpha=1, lambda_=DegreeDistribution.normalized({2: 1.0}))
        inst = build_code(params, 3, seed=0)
        assert (inst.n_edges, inst.rep_len, inst.parity_len, inst.codeword_len) == (6, 6, 6, 12)

    def test_full_loading_length(self, full_loading_code):
        inst = build_code(full_loading_code, 4096, seed=1)
        assert abs(4096 / inst.codeword_len - 0.2) <= 0.01
        assert inst.n_edges % full_loading_code.alpha == 0

    @pytest.mark.parametrize("name", [p.name for p in list_presets()])
    def test_measured_rate_matches(self, name):
        params = get_preset(name).params
        inst = build_code(params, 4096, seed=2)
        assert abs(inst.measured_rate - params.rate) <= 0.01

    def test_same_seed_same_interleavers(self, full_loading_code):
        a = build_code(full_loading_code, 512, seed=7, n_users=3)
        b = build_code(full_loading_code, 512, seed=7, n_users=3)
        assert np.array_equal(a.edge_perm, b.edge_perm)
        assert np.array_equal(a.user_perms, b.user_perms)

    def test_users_get_distinct_interleavers(self, small_instance):
        assert small_instance.n_users == 4
        assert not np.array_equal(small_instance.user_perms[0], small_instance.user_perms[1])

    def test_quantization_counts_sum(self, full_loading_code):
        counts = quantize_degrees(full_loading_code.lambda_, 1000, full_loading_code.alpha)
        assert sum(counts.values()) == 1000
        assert sum(d * c for d, c in counts.items()) % full_loading_code.alpha == 0

    def test_divisibility_repair(self):
        lam = DegreeDistribution.normalized({3: 0.5, 4: 0.5})
        counts = quantize_degrees(lam, 7, alpha=5)
        assert sum(counts.values()) == 7
        assert sum(d * c for d, c in counts.items()) % 5 == 0

    def test_empty_class_reported(self, full_loading_code):
        with pytest.raises(CodeConstructionError):
            build_code(full_loading_code, 2, seed=0)

    def test_bad_edge_permutation(self):
        with pytest.raises(ConfigError):
            build_code_from_degrees([2, 2], q=1, alpha=1, seed=0, edge_perm=[0, 0, 1, 2])

    def test_edge_count_not_divisible(self):
        with pytest.raises(CodeConstructionError):
            build_code_from_degrees([3], q=1, alpha=2, seed=0)


# =============================================================================
# Encoding
# =============================================================================


@pytest.mark.unit
class TestEncode:
    def test_hand_computed_codeword(self):
        """Degree-2 bits, alpha = 1, q = 2, identity edge interleaver."""
        inst = build_code_from_degrees([2, 2, 2], q=2, alpha=1, seed=0, edge_perm=np.arange(6))
        word = encode(inst, [1, 0, 1])
        assert word.tolist() == [1, 0, 1, 1, 0, 1] + [1, 0, 0, 0, 1, 0]

    def test_all_zero(self, small_instance):
        assert not encode(small_instance, np.zeros(256, dtype=np.int8)).any()

    def test_linearity(self, small_instance, rng):
        u = rng.integers(0, 2, 256)
        w = rng.integers(0, 2, 256)
        assert np.array_equal(encode(small_instance, u ^ w), encode(small_instance, u) ^ encode(small_instance, w))

    def test_codewords_satisfy_checks(self, small_instance, rng):
        bits = rng.integers(0, 2, (4, 256))
        parity = encode(small_instance, bits)[:, small_instance.rep_len :]
        assert checks_satisfied(small_instance, bits, parity).all()

    def test_wrong_length(self, small_instance):
        with pytest.raises(ConfigError):
            encode(small_instance, np.zeros(10, dtype=np.int8))

    def test_modulation_applies_signs_and_interleaver(self, small_instance, rng):
        bits = rng.integers(0, 2, (4, 256))
        X = modulate(small_instance, bits)
        assert X.shape == (4, small_instance.codeword_len)
        assert np.array_equal(to_codeword_order(small_instance, X), 1.0 - 2.0 * encode(small_instance, bits))

    def test_symbol_order_inverts_codeword_order(self, small_instance, rng):
        llrs = rng.standard_normal((4, small_instance.codeword_len))
        back = to_codeword_order(small_instance, to_symbol_order(small_instance, llrs))
        assert np.allclose(back, llrs)

    def test_repetition_signs_alternate(self):
        inst = build_code_from_degrees([2, 2], q=3, alpha=2, seed=0)
        assert inst.signs.tolist() == [1, 1, -1, -1, 1, 1, 1, 1]


# =============================================================================
# Decoding
# =============================================================================


@pytest.mark.unit
class TestDecodeActivation:
    def test_noiseless_decode(self, small_instance, rng):
        bits = rng.integers(0, 2, (4, 256)).astype(np.int8)
        llrs = 50.0 * (1.0 - 2.0 * encode(small_instance, bits))
        state = DecoderState.fresh(small_instance)
        decode_activation(state, llrs)
        assert np.array_equal(hard_decision(state), bits)
        assert syndrome_ok(state).all()

    def test_zero_input_gives_zero_output(self, small_instance):
        state = DecoderState.fresh(small_instance)
        out = decode_activation(state, np.zeros((4, small_instance.codeword_len)))
        assert np.allclose(out, 0.0, atol=1e-12)

    def test_matches_exhaustive_map(self, toy_instance, rng):
        """Cycle-free toy code: decoder posteriors equal brute-force MAP on 1000 random inputs."""
        draws = 1000
        scale = rng.choice([0.5, 2.0, 4.0, 6.0], size=(draws, 1))
        llrs = scale * rng.uniform(-1.0, 1.0, (draws, toy_instance.codeword_len))

        state = DecoderState.fresh(toy_instance, n_users=draws)
        ext = decode_activation(state, llrs)
        for i in range(draws):
            info_map, code_map = _map_llrs(toy_instance, llrs[i])
            assert np.allclose(state.total[i], info_map, atol=1e-6), f"draw {i}"
            assert np.allclose(ext[i] + llrs[i], code_map, atol=1e-6), f"draw {i}"

    def test_extra_activations_keep_map_fixed_point(self, toy_instance, rng):
        llrs = rng.uniform(-3.0, 3.0, toy_instance.codeword_len)
        info_map, _ = _map_llrs(toy_instance, llrs)
        state = DecoderState.fresh(toy_instance)
        for _ in range(3):
            decode_activation(state, llrs[None, :])
        assert state.activations == 3
        assert np.allclose(state.total[0], info_map, atol=1e-6)

    def test_extrinsic_excludes_own_llr(self, toy_instance, rng):
        llrs = rng.uniform(-3.0, 3.0, toy_instance.codeword_len)
        base = decode_activation(DecoderState.fresh(toy_instance), llrs[None, :])[0]
        for j in range(toy_instance.codeword_len):
            changed = llrs.copy()
            changed[j] += 2.5
            out = decode_activation(DecoderState.fresh(toy_instance), changed[None, :])[0]
            assert out[j] == pytest.approx(base[j], abs=1e-9)

    def test_nan_input_raises(self, small_instance):
        llrs = np.zeros((4, small_instance.codeword_len))
        llrs[1, 5] = np.nan
        with pytest.raises(NumericalError):
            decode_activation(DecoderState.fresh(small_instance), llrs)

    def test_shape_mismatch(self, small_instance):
        with pytest.raises(ConfigError):
            decode_activation(DecoderState.fresh(small_instance), np.zeros((4, 3)))

    def test_outputs_are_clipped(self, small_instance):
        llrs = np.full((4, small_instance.codeword_len), 1e6)
        out = decode_activation(DecoderState.fresh(small_instance, llr_clip=20.0), llrs)
        assert np.abs(out).max() <= 20.0


@pytest.mark.unit
class TestHardDecision:
    def test_sign_and_tie_rule(self, toy_instance):
        state = DecoderState.fresh(toy_instance)
        state.total = np.array([[3.2, 0.0, -1.0, -0.5]])
        assert hard_decision(state).tolist() == [[0, 0, 1, 1]]


# =============================================================================
# Complexity
# =============================================================================


@pytest.mark.unit
class TestOperationCounts:
    def test_full_loading(self):
        preset = get_preset("mu-k8m8-r0.2")
        counts = operation_counts(preset.params, 8, preset.nominal_rate)
        assert counts == pytest.approx((768.0, 576.0, 576.0))

    def test_over_loading(self):
        preset = get_preset("mu-k16m8-r0.15")
        counts = operation_counts(preset.params, 16, preset.nominal_rate)
        assert round(counts.additions) == 1915
        assert round(counts.multiplications) == 1344
        assert round(counts.exp_log) == 1344

    def test_invalid_users(self, full_loading_code):
        with pytest.raises(ConfigError):
            operation_counts(full_loading_code, 0)

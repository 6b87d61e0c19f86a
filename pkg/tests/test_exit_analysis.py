"""Tests for the asymptotic EXIT analysis."""

import math

import numpy as np
import pytest
from scipy import integrate, stats

from muira.capacity import mimo_noma_capacity_limit
from muira.config import ExitConfig
from muira.detector import GaussianMessageVector, extrinsic_extract, lmmse_posterior
from muira.exceptions import ConfigError, ConvergenceError, DomainError, InfeasibleError
from muira.exit_analysis import (
    CurveCache,
    _j_table,
    analytic_exit_curve,
    decoding_threshold,
    ebn0_to_sigma,
    feedback_variance,
    get_exit_curve,
    j_function,
    j_inverse,
    llr_mean,
    llr_mutual_information,
    merge_curves,
    lmmse_posterior_variance,
    lmmse_variance_transfer,
    lmmse_variance_transfer_asymptotic,
    monte_carlo_exit_curve,
    mp_posterior_variance,
    mutual_info_to_detector_variance,
    mutual_info_to_variance,
    operating_grid,
    run_exit_recursion,
    sigma_to_ebn0,
    tunnel_gap,
    variance_to_mutual_info,
)
from muira.models import SystemDims
from muira.presets import get_preset

ANALYTIC = ExitConfig(exit_model="analytic", grid_points=41)
REFERENCE_PRESETS = [
    "mu-k8m8-r0.2",
    "mu-k16m8-r0.15",
    "mu-k24m8-r0.13",
    "mu-k32m8-r0.1",
    "mu-k32m4-r0.1",
    "mu-k64m8-r0.1",
]


def _j_by_quadrature(s: float) -> float:
    pdf = stats.norm(loc=s**2 / 2.0, scale=s).pdf
    value, _ = integrate.quad(lambda x: pdf(x) * np.logaddexp(0.0, -x) / math.log(2.0), -np.inf, np.inf)
    return 1.0 - value


# =============================================================================
# Detector variance transfer
# =============================================================================


@pytest.mark.unit
class TestVarianceTransfer:
    def test_full_loading_golden_ratio(self):
        assert lmmse_variance_transfer(1.0, 8, 8, math.sqrt(8.0)) == pytest.approx(1.618, abs=1e-3)

    def test_vanishing_prior_leaves_noise(self):
        assert lmmse_variance_transfer(1e-12, 8, 8, 1.0) == pytest.approx(1.0 / 8.0, rel=1e-6)

    def test_vectorized(self):
        v = np.array([0.1, 0.5, 1.0])
        out = lmmse_variance_transfer(v, 16, 8, 2.0)
        assert out.shape == (3,)
        assert np.all(np.diff(out) > 0)

    def test_rejects_non_positive(self):
        with pytest.raises(ConfigError):
            lmmse_variance_transfer(0.0, 8, 8, 1.0)
        with pytest.raises(ConfigError):
            lmmse_variance_transfer(1.0, 8, 8, 0.0)

    @pytest.mark.parametrize(("K", "M", "sigma", "v"), [(8, 8, math.sqrt(8.0), 1.0), (16, 8, math.sqrt(8.0), 1.0), (4, 8, 1.5, 0.3)])
    def test_posterior_forms_agree(self, K, M, sigma, v):
        assert mp_posterior_variance(v, K, M, sigma) == pytest.approx(
            lmmse_posterior_variance(v, K, M, sigma), rel=1e-9
        )

    def test_matches_measured_detector(self, rng):
        """Squared extrinsic error of the real detector, fully loaded 64-antenna system."""
        K, M = 64, 64
        prior = GaussianMessageVector.uninformative(K)
        errors = []
        for _ in range(100):
            H = rng.standard_normal((M, K))
            x = rng.choice([-1.0, 1.0], size=K)
            Y = H @ x + rng.standard_normal(M)
            ext = extrinsic_extract(lmmse_posterior(Y, H, 1.0, prior), prior)
            errors.append(ext.means - x)
        measured = float(np.mean(np.concatenate(errors) ** 2))
        expected = lmmse_variance_transfer(1.0, K, M, 1.0)
        assert abs(measured - expected) / expected < 0.10


@pytest.mark.unit
class TestAsymptoticTransfer:
    def test_under_loaded(self):
        assert lmmse_variance_transfer_asymptotic(0.7, 8, 16, 1.0) == pytest.approx(1.0 / 8.0)

    def test_over_loaded(self):
        assert lmmse_variance_transfer_asymptotic(0.4, 16, 8, 1.0) == pytest.approx(0.4)

    def test_equal_load_inside_domain(self):
        # sqrt(1 * 16 / 1) = 4
        assert lmmse_variance_transfer_asymptotic(1.0, 16, 16, 1.0) == pytest.approx(1.0 / 3.0)

    def test_equal_load_outside_domain(self):
        with pytest.raises(DomainError):
            lmmse_variance_transfer_asymptotic(1.0, 8, 8, 4.58)

    @pytest.mark.parametrize(("K", "v"), [(2048, 1.0), (4096, 1.0), (4096, 0.25), (8192, 0.5)])
    def test_large_system_agreement(self, K, v):
        finite = lmmse_variance_transfer(v, K, 4096, 1.0)
        limit = lmmse_variance_transfer_asymptotic(v, K, 4096, 1.0)
        assert abs(finite - limit) / limit <= 0.02


# =============================================================================
# J function and conversions
# =============================================================================


@pytest.mark.unit
class TestJFunction:
    def test_endpoints(self):
        assert j_function(0.0) == 0.0
        assert j_function(100.0) > 0.999999

    @pytest.mark.parametrize("s", [0.5, 1.0, 2.0, 5.0])
    def test_matches_quadrature(self, s):
        assert j_function(s) == pytest.approx(_j_by_quadrature(s), abs=1e-6)

    def test_increasing(self):
        values = j_function(np.linspace(0.0, 20.0, 400))
        assert np.all(np.diff(values) >= 0.0)

    @pytest.mark.parametrize("I", [0.001, 0.01, 0.05, 0.3, 0.5, 0.9, 0.999])
    def test_inverse_roundtrip(self, I):
        assert j_function(j_inverse(I)) == pytest.approx(I, abs=1e-6)

    def test_inverse_table_is_strictly_increasing(self):
        _j_table.cache_clear()
        table = _j_table()
        assert np.all(np.diff(table.inverse.x) > 0.0)
        assert table.sigma_top > 10.0
        assert j_inverse(j_function(9.0)) == pytest.approx(9.0, rel=1e-3)

    def test_inverse_domain(self):
        with pytest.raises(DomainError):
            j_inverse(1.0)
        with pytest.raises(DomainError):
            j_inverse(-0.1)

    def test_negative_sigma(self):
        with pytest.raises(ConfigError):
            j_function(-1.0)


@pytest.mark.unit
class TestConversions:
    def test_variance_to_information(self):
        assert variance_to_mutual_info(4.0) == pytest.approx(_j_by_quadrature(1.0), abs=1e-6)

    def test_detector_variance_inverse(self):
        I = variance_to_mutual_info(0.8)
        assert mutual_info_to_detector_variance(I) == pytest.approx(0.8, rel=1e-4)
        assert mutual_info_to_detector_variance(0.0) == math.inf

    def test_llr_mean(self):
        assert llr_mean(0.0) == 0.0
        assert llr_mean(j_function(2.0)) == pytest.approx(2.0, rel=1e-5)

    def test_feedback_variance_uninformative(self):
        est = mutual_info_to_variance(0.0)
        assert est.value == pytest.approx(1.0)
        assert est.std_error == pytest.approx(0.0)

    def test_feedback_variance_saturated(self):
        assert mutual_info_to_variance(0.9999).value < 1e-3

    def test_feedback_variance_against_quadrature(self):
        m = llr_mean(0.5)
        pdf = stats.norm(loc=m, scale=math.sqrt(2.0 * m)).pdf
        exact, _ = integrate.quad(lambda x: pdf(x) * (1.0 - math.tanh(x / 2.0) ** 2), -np.inf, np.inf)
        est = mutual_info_to_variance(0.5)
        assert abs(est.value - exact) < 4.0 * est.std_error + 1e-4

    def test_tabulated_matches_direct(self):
        for I in (0.1, 0.5, 0.8):
            assert feedback_variance(I) == pytest.approx(mutual_info_to_variance(I).value, abs=2e-3)

    def test_feedback_variance_domain(self):
        with pytest.raises(DomainError):
            mutual_info_to_variance(1.0)

    def test_llr_mutual_information(self):
        assert llr_mutual_information(np.zeros(10)) == pytest.approx(0.0)
        assert llr_mutual_information(np.full(10, 50.0)) == pytest.approx(1.0)
        bits = np.array([0, 1, 0, 1])
        llrs = np.array([40.0, -40.0, 40.0, -40.0])
        assert llr_mutual_information(llrs, bits) == pytest.approx(1.0)

    def test_ebn0_conversion(self):
        assert ebn0_to_sigma(-9.22, 0.2) == pytest.approx(4.58, abs=0.02)
        assert sigma_to_ebn0(ebn0_to_sigma(-3.0, 0.15), 0.15) == pytest.approx(-3.0)
        with pytest.raises(ConfigError):
            ebn0_to_sigma(0.0, 0.0)


# =============================================================================
# Decoder EXIT curves
# =============================================================================


@pytest.mark.unit
class TestExitCurves:
    def test_analytic_endpoints(self, full_loading_code):
        curve = analytic_exit_curve(full_loading_code, config=ANALYTIC)
        assert curve.model == "analytic"
        assert curve.I_e[0] == pytest.approx(0.0, abs=1e-9)
        assert curve.I_e[-1] > 0.999
        assert curve.monotone_violations == 0
        assert len(curve.I_a) == 41

    def test_analytic_rep_fraction(self, full_loading_code):
        curve = analytic_exit_curve(full_loading_code, config=ANALYTIC)
        assert curve.rep_fraction == pytest.approx(2 * full_loading_code.rate)

    def test_monte_carlo_small(self, full_loading_code):
        config = ExitConfig(grid_points=5, info_len=512, activations=5, seed=3)
        curve = monte_carlo_exit_curve(full_loading_code, config=config)
        assert curve.model == "monte_carlo"
        assert curve.I_e[0] == pytest.approx(0.0, abs=1e-9)
        assert curve.I_e[-1] > 0.99
        assert curve.I_e[2] > curve.I_e[0]

    def test_bad_grid(self, full_loading_code):
        with pytest.raises(ConfigError):
            analytic_exit_curve(full_loading_code, grid=[0.0, 0.5, 0.4])
        with pytest.raises(ConfigError):
            analytic_exit_curve(full_loading_code, grid=[0.0, 1.5])

    def test_cache_hits(self, full_loading_code):
        cache = CurveCache()
        config = ExitConfig(exit_model="analytic", grid_points=11)
        first = get_exit_curve(full_loading_code, config, cache)
        second = get_exit_curve(full_loading_code, config, cache)
        assert first is second
        assert (cache.hits, cache.misses, len(cache)) == (1, 1, 1)
        get_exit_curve(full_loading_code, ExitConfig(exit_model="analytic", grid_points=21), cache)
        assert len(cache) == 2
        cache.clear()
        assert len(cache) == 0

    def test_empty_cache_is_used(self, full_loading_code):
        cache = CurveCache()
        config = ExitConfig(exit_model="analytic", grid_points=11, seed=99)
        curve = get_exit_curve(full_loading_code, config, cache)
        assert (cache.misses, len(cache)) == (1, 1)
        assert get_exit_curve(full_loading_code, config, cache) is curve
        assert cache.hits == 1


# =============================================================================
# Recursion and threshold
# =============================================================================


@pytest.mark.unit
class TestRecursion:
    def test_low_noise_converges(self, full_loading_code):
        curve = analytic_exit_curve(full_loading_code, config=ANALYTIC)
        traj = run_exit_recursion(curve, 8, 8, 0.5, ANALYTIC)
        assert traj.converged
        assert traj.iterations_used == len(traj.states) >= 1
        assert traj.states[0].v == 1.0

    def test_high_noise_does_not_converge(self, full_loading_code):
        curve = analytic_exit_curve(full_loading_code, config=ANALYTIC)
        traj = run_exit_recursion(curve, 8, 8, 20.0, ANALYTIC)
        assert not traj.converged
        assert traj.verdict in ("stalled", "undetermined")

    def test_iteration_cap(self, full_loading_code):
        curve = analytic_exit_curve(full_loading_code, config=ANALYTIC)
        traj = run_exit_recursion(curve, 8, 8, 20.0, ANALYTIC.model_copy(update={"stall_window": 50}), max_iters=3)
        assert traj.iterations_used == 3
        assert traj.verdict == "undetermined"

    def test_information_increases(self, full_loading_code):
        curve = analytic_exit_curve(full_loading_code, config=ANALYTIC)
        traj = run_exit_recursion(curve, 8, 8, 1.0, ANALYTIC)
        I_a = [s.I_a for s in traj.states]
        assert all(b >= a - 1e-4 for a, b in zip(I_a, I_a[1:], strict=False))

    def test_tunnel_gap_sign(self, full_loading_code):
        curve = analytic_exit_curve(full_loading_code, config=ANALYTIC)
        assert tunnel_gap(curve, 8, 8, 0.5, ANALYTIC) > 0.0
        assert tunnel_gap(curve, 8, 8, 20.0, ANALYTIC) <= 0.0

    def test_window_without_boundary(self, full_loading_code):
        curve = analytic_exit_curve(full_loading_code, config=ANALYTIC)
        with pytest.raises(InfeasibleError):
            decoding_threshold(full_loading_code, 8, 8, (5.0, 10.0), config=ANALYTIC, curve=curve)

    def test_window_top_needs_verdict(self, full_loading_code):
        curve = analytic_exit_curve(full_loading_code, config=ANALYTIC)
        capped = ANALYTIC.model_copy(update={"max_iters": 1, "stall_window": 50})
        with pytest.raises(ConvergenceError):
            decoding_threshold(full_loading_code, 8, 8, (-12.0, -11.0), config=capped, curve=curve)

    def test_reversed_window(self, full_loading_code):
        with pytest.raises(ConfigError):
            decoding_threshold(full_loading_code, 8, 8, (0.0, -1.0), config=ANALYTIC)


@pytest.mark.unit
class TestOperatingRange:
    def test_grid_spans_detector_range(self):
        sigma_lo, sigma_hi = 3.0, 5.0
        grid = operating_grid(8, 8, sigma_lo, sigma_hi, 31)
        start = variance_to_mutual_info(lmmse_variance_transfer(1.0, 8, 8, sigma_hi))
        ceiling = variance_to_mutual_info(lmmse_variance_transfer(1e-300, 8, 8, sigma_lo))
        assert grid[0] == pytest.approx(start, abs=1e-9)
        assert grid[-1] == pytest.approx(ceiling, abs=1e-9)
        assert grid.size == 31
        assert np.all(np.diff(grid) > 0.0)

    def test_grid_order_of_noise_levels(self):
        assert np.array_equal(operating_grid(32, 8, 6.0, 7.0, 11), operating_grid(32, 8, 7.0, 6.0, 11))

    def test_clean_channel_is_capped(self):
        grid = operating_grid(8, 64, 0.01, 0.01, 21)
        assert grid[-1] < 1.0
        assert np.all(np.diff(grid) > 0.0)

    def test_grid_rejects_bad_input(self):
        with pytest.raises(ConfigError):
            operating_grid(8, 8, 0.0, 1.0, 11)
        with pytest.raises(ConfigError):
            operating_grid(8, 8, 1.0, 2.0, 1)

    def test_merge_keeps_both_samplings(self, full_loading_code):
        coarse = analytic_exit_curve(full_loading_code, config=ANALYTIC)
        extra = analytic_exit_curve(full_loading_code, grid=[0.1, 0.33], config=ANALYTIC)
        merged = merge_curves(coarse, extra)
        assert len(merged.I_a) == 43
        assert np.all(np.diff(merged.I_a) > 0.0)
        assert merged.I_e[merged.I_a.index(0.1)] == pytest.approx(extra.I_e[0])
        assert merged.monotone_violations == 0

    def test_merge_drops_duplicates(self, full_loading_code):
        coarse = analytic_exit_curve(full_loading_code, config=ANALYTIC)
        assert merge_curves(coarse, coarse).I_a == coarse.I_a

    def test_merge_rejects_other_model(self, full_loading_code):
        coarse = analytic_exit_curve(full_loading_code, config=ANALYTIC)
        other = coarse.model_copy(update={"model": "monte_carlo"})
        with pytest.raises(ConfigError):
            merge_curves(coarse, other)

    @pytest.mark.slow
    @pytest.mark.parametrize(("name", "window"), [("mu-k8m8-r0.2", (-14.0, -4.0)), ("mu-k32m8-r0.1", (-14.0, -4.0))])
    def test_refined_threshold_matches_dense_grid(self, name, window):
        """Refining the coarse curve lands where a uniformly dense curve does."""
        preset = get_preset(name)
        refined = decoding_threshold(preset.params, preset.K, preset.M, window, config=ANALYTIC)
        dense = decoding_threshold(
            preset.params,
            preset.K,
            preset.M,
            window,
            config=ANALYTIC.model_copy(update={"grid_points": 2001, "refine_points": 0}),
        )
        assert refined.refined
        assert not dense.refined
        assert refined.threshold_db == pytest.approx(dense.threshold_db, abs=0.1)


@pytest.mark.slow
class TestThresholdReproduction:
    @pytest.fixture(scope="class", params=REFERENCE_PRESETS)
    def preset(self, request):
        return get_preset(request.param)

    @pytest.fixture(scope="class")
    def report(self, preset):
        ref = preset.reference_threshold_db
        return decoding_threshold(preset.params, preset.K, preset.M, (ref - 3.0, ref + 3.0))

    def test_threshold(self, preset, report):
        assert report.refined
        assert abs(report.threshold_db - preset.reference_threshold_db) <= 0.3
        assert report.sigma_n == pytest.approx(ebn0_to_sigma(report.threshold_db, report.rate))

    def test_gap_to_capacity(self, preset, report):
        limit = mimo_noma_capacity_limit(SystemDims(K=preset.K, M=preset.M), preset.params.rate)
        assert report.threshold_db - limit.limit_db <= 0.5


@pytest.mark.slow
class TestFullLoadingRecursion:
    @pytest.fixture(scope="class")
    def measured_curve(self):
        params = get_preset("mu-k8m8-r0.2").params
        config = ExitConfig()
        band = operating_grid(8, 8, ebn0_to_sigma(-8.2, params.rate), ebn0_to_sigma(-10.2, params.rate), 61)
        return merge_curves(get_exit_curve(params, config), monte_carlo_exit_curve(params, band, config))

    def test_converges_above_threshold(self, full_loading_code, measured_curve):
        sigma = ebn0_to_sigma(-9.0, full_loading_code.rate)
        assert run_exit_recursion(measured_curve, 8, 8, sigma).converged

    def test_fails_below_threshold(self, full_loading_code, measured_curve):
        sigma = ebn0_to_sigma(-9.5, full_loading_code.rate)
        assert not run_exit_recursion(measured_curve, 8, 8, sigma).converged

    def test_measured_curve_threshold(self, full_loading_code, measured_curve):
        config = ExitConfig(refine_points=0)
        report = decoding_threshold(full_loading_code, 8, 8, (-12.0, -6.0), config=config, curve=measured_curve)
        assert abs(report.threshold_db - (-9.22)) <= 0.3
        assert not report.refined

    def test_analytic_threshold_bracketed(self, full_loading_code):
        report = decoding_threshold(full_loading_code, 8, 8, config=ANALYTIC)
        assert -15.0 < report.threshold_db < 10.0
        assert report.candidates_db

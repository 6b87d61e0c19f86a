"""
Asymptotic EXIT analysis of the LMMSE detector / MU-IRA decoder loop.

The detector side is the closed-form variance transfer for a channel with
i.i.d. N(0, 1) entries. The decoder side is an EXIT curve sampled on an
a-priori information grid, either measured by Monte Carlo on the real
decoder or computed with a Gaussian-approximation model of the graph. The
recursion alternates the two until the decoder output saturates or the
variance stops moving, and the threshold search bisects on that verdict.
"""

import functools
import json
import logging
import math
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np
from scipy import integrate, interpolate

from muira.codec import DEFAULT_LLR_CLIP, DecoderState, build_code, decode_activation
from muira.config import ExitConfig
from muira.exceptions import ConfigError, ConvergenceError, DomainError, InfeasibleError
from muira.models import (
    CodeParams,
    ExitCurve,
    ExitState,
    ExitTrajectory,
    ThresholdReport,
)
from muira.seeding import Component, derive_seed

logger = logging.getLogger(__name__)

J_SIGMA_MAX = 20.0
J_TABLE_POINTS = 2001
PSI_TABLE_POINTS = 801
I_CEILING = 1.0 - 1e-12
CURVE_CHUNK = 8
OPERATING_SIGMA_CAP = 10.0
REFINE_BELOW_DB = 2.0
REFINE_ABOVE_DB = 0.5


# ============================================================================
# Detector variance transfer
# ============================================================================


def _check_positive(**values: float) -> None:
    for name, value in values.items():
        if not np.all(np.asarray(value) > 0):
            raise ConfigError(f"must be > 0, got {value}", field=name)


def lmmse_variance_transfer(v, K: int, M: int, sigma_n: float):
    """Extrinsic variance of the LMMSE detector for prior variance ``v``.

    v_e = (s + c v + sqrt((s + c v)^2 + 4 s v)) / 2 with c = (K - M)/M and
    s = sigma_n^2 / M, the per-antenna-normalized noise of a unit-entry
    channel. Vectorized over ``v``.
    """
    _check_positive(v=v, sigma_n=sigma_n, K=K, M=M)
    v = np.asarray(v, dtype=np.float64)
    s = sigma_n**2 / M
    c = (K - M) / M
    a = s + c * v
    out = (a + np.sqrt(a**2 + 4.0 * s * v)) / 2.0
    return float(out) if out.ndim == 0 else out


def lmmse_posterior_variance(v, K: int, M: int, sigma_n: float):
    """Posterior variance v_hat with 1/v_hat = 1/v + 1/v_e."""
    ve = lmmse_variance_transfer(v, K, M, sigma_n)
    return v * ve / (v + ve)


def mp_posterior_variance(v: float, K: int, M: int, sigma_n: float) -> float:
    """Posterior variance from the large-system F-function form.

    v_hat = v (1 - F(K/M, sigma^2/(K v)) / 4) with
    F(a, b) = (sqrt((1 + 1/sqrt(a))^2 + b) - sqrt((1 - 1/sqrt(a))^2 + b))^2.
    Agrees with :func:`lmmse_posterior_variance`.
    """
    _check_positive(v=v, sigma_n=sigma_n, K=K, M=M)
    a = K / M
    b = sigma_n**2 / (K * v)
    F = (math.sqrt((1 + 1 / math.sqrt(a)) ** 2 + b) - math.sqrt((1 - 1 / math.sqrt(a)) ** 2 + b)) ** 2
    return v * (1.0 - F / 4.0)


def lmmse_variance_transfer_asymptotic(v, K: int, M: int, sigma_n: float):
    """Large-system limit of :func:`lmmse_variance_transfer`.

    beta < 1: sigma^2/(M - K); beta > 1: (K - M)/M * v;
    beta = 1: v / (sqrt(v K / sigma^2) - 1), defined only while
    sqrt(v K / sigma^2) > 1.
    """
    _check_positive(v=v, sigma_n=sigma_n, K=K, M=M)
    v = np.asarray(v, dtype=np.float64)
    if K < M:
        out = np.full_like(v, sigma_n**2 / (M - K))
    elif K > M:
        out = (K - M) / M * v
    else:
        root = np.sqrt(v * K / sigma_n**2)
        if np.any(root <= 1.0):
            logger.warning(f"Equal-load asymptotic transfer outside its domain (v={v}, K={K})")
            raise DomainError(
                f"sqrt(v K / sigma^2) must exceed 1, got {np.min(root):.6g}", field="v"
            )
        out = v / (root - 1.0)
    return float(out) if out.ndim == 0 else out


# ============================================================================
# J function and conversions
# ============================================================================


def _j_quad(sigma: float) -> float:
    if sigma <= 0.0:
        return 0.0
    mean = sigma**2 / 2.0

    def integrand(z):
        x = mean + sigma * z
        return math.exp(-z * z / 2.0) * np.logaddexp(0.0, -x)

    # kink of log(1 + e^-x) sits at x = 0
    val, _ = integrate.quad(
        integrand, -40.0, 40.0, points=[-mean / sigma], epsabs=1e-13, epsrel=1e-12, limit=400
    )
    return 1.0 - val / (math.sqrt(2.0 * math.pi) * math.log(2.0))


class _JTable(NamedTuple):
    forward: interpolate.CubicSpline
    slope: interpolate.PPoly
    inverse: interpolate.PchipInterpolator
    sigma_top: float


@functools.cache
def _j_table() -> _JTable:
    sigmas = np.linspace(0.0, J_SIGMA_MAX, J_TABLE_POINTS)
    values = np.array([_j_quad(s) for s in sigmas])
    forward = interpolate.CubicSpline(sigmas, values)
    # inverse over the strictly increasing part of sqrt(J), abscissa sqrt(J) to tame s ~ sqrt(I)
    roots = np.sqrt(np.clip(values, 0.0, None))
    rising = np.concatenate([[True], np.diff(roots) > 0])
    stop = int(np.argmin(rising)) if not rising.all() else rising.size
    inverse = interpolate.PchipInterpolator(roots[:stop], sigmas[:stop])
    logger.debug(f"Tabulated J on [0, {J_SIGMA_MAX}] ({J_TABLE_POINTS} points)")
    return _JTable(forward, forward.derivative(), inverse, float(sigmas[stop - 1]))


def j_function(sigma_a):
    """Mutual information of a BPSK bit seen through an LLR ~ N(s^2/2, s^2).

    J(s) = 1 - E[log2(1 + exp(-L))]; tabulated once by adaptive quadrature
    and evaluated by spline. Vectorized.
    """
    s = np.asarray(sigma_a, dtype=np.float64)
    if np.any(s < 0):
        raise ConfigError("sigma_a must be >= 0", field="sigma_a")
    table = _j_table()
    out = np.where(s >= J_SIGMA_MAX, 1.0, np.clip(table.forward(np.minimum(s, J_SIGMA_MAX)), 0.0, 1.0))
    out = np.where(s == 0.0, 0.0, out)
    return float(out) if out.ndim == 0 else out


def _j_inverse_unchecked(I):
    table = _j_table()
    I = np.clip(np.asarray(I, dtype=np.float64), 0.0, I_CEILING)
    top = float(table.forward(table.sigma_top))
    s = table.inverse(np.sqrt(np.minimum(I, top)))
    for _ in range(3):
        slope = table.slope(s)
        step = np.where(slope > 1e-12, (table.forward(s) - I) / np.where(slope > 1e-12, slope, 1.0), 0.0)
        s = np.clip(s - step, 0.0, table.sigma_top)
    s = np.where(I <= 0.0, 0.0, s)
    return s


def j_inverse(I):
    """Inverse of :func:`j_function` on [0, 1). Vectorized."""
    arr = np.asarray(I, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise DomainError("mutual information must lie in [0, 1)", field="I")
    out = _j_inverse_unchecked(arr)
    return float(out) if np.ndim(out) == 0 else out


def variance_to_mutual_info(v_e):
    """Decoder a-priori information J(sqrt(4 / v_e))."""
    v_e = np.asarray(v_e, dtype=np.float64)
    _check_positive(v_e=v_e)
    with np.errstate(divide="ignore"):
        out = j_function(np.sqrt(4.0 / v_e))
    return out


def mutual_info_to_detector_variance(I_a):
    """Inverse of :func:`variance_to_mutual_info`; infinite at I_a = 0."""
    s = np.asarray(_j_inverse_unchecked(I_a))
    with np.errstate(divide="ignore"):
        out = np.where(s > 0, 4.0 / np.where(s > 0, s, 1.0) ** 2, np.inf)
    return float(out) if out.ndim == 0 else out


def llr_mean(I):
    """Mean m = J^-1(I)^2 / 2 of a consistent Gaussian LLR."""
    s = _j_inverse_unchecked(I)
    out = s**2 / 2.0
    return float(out) if np.ndim(out) == 0 else out


class VarianceEstimate(NamedTuple):
    value: float
    std_error: float


def _feedback_samples(means: np.ndarray, z: np.ndarray) -> np.ndarray:
    L = means[..., None] + np.sqrt(2.0 * means)[..., None] * z
    return 1.0 - np.tanh(L / 2.0) ** 2


@functools.cache
def _standard_normals(samples: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(derive_seed(seed, Component.EXIT, 0))
    z = rng.standard_normal(samples)
    z.setflags(write=False)
    return z


def mutual_info_to_variance(I_e: float, samples: int = 100_000, seed: int = 2024) -> VarianceEstimate:
    """Fed-back variance E[1 - tanh^2(L/2)] with L ~ N(m, 2m), m = J^-1(I)^2/2.

    Monte-Carlo with a fixed set of standard normals per ``(samples, seed)``,
    so repeated calls share common random numbers.
    """
    if not 0.0 <= I_e < 1.0:
        raise DomainError(f"must lie in [0, 1), got {I_e}", field="I_e")
    z = _standard_normals(samples, seed)
    draws = _feedback_samples(np.asarray(llr_mean(I_e)), z)
    return VarianceEstimate(float(draws.mean()), float(draws.std(ddof=1) / math.sqrt(samples)))


@functools.cache
def _psi_table(samples: int, seed: int) -> interpolate.PchipInterpolator:
    sigmas = np.linspace(0.0, J_SIGMA_MAX, PSI_TABLE_POINTS)
    z = _standard_normals(samples, seed)
    values = np.empty_like(sigmas)
    for start in range(0, sigmas.size, 32):
        chunk = sigmas[start : start + 32]
        values[start : start + 32] = _feedback_samples(chunk**2 / 2.0, z).mean(axis=-1)
    return interpolate.PchipInterpolator(sigmas, values)


def feedback_variance(I, samples: int = 100_000, seed: int = 2024):
    """Vectorized :func:`mutual_info_to_variance` through a table over J^-1(I)."""
    table = _psi_table(samples, seed)
    out = np.clip(table(_j_inverse_unchecked(I)), 0.0, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def llr_mutual_information(llrs: np.ndarray, bits: np.ndarray | None = None, axis=None):
    """Time-average estimate 1 - mean(log2(1 + exp(-x L))) with x = +-1."""
    llrs = np.asarray(llrs, dtype=np.float64)
    if bits is not None:
        llrs = llrs * (1.0 - 2.0 * np.asarray(bits))
    return 1.0 - np.mean(np.logaddexp(0.0, -llrs), axis=axis) / math.log(2.0)


# ============================================================================
# Decoder EXIT curves
# ============================================================================


def default_grid(points: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise ConfigError("grid must be strictly increasing with >= 2 points", field="grid")
    if grid[0] < 0.0 or grid[-1] > 1.0:
        raise ConfigError("grid must lie in [0, 1]", field="grid")
    return grid


def _count_violations(values: np.ndarray, what: str) -> int:
    violations = int(np.count_nonzero(np.diff(values) < 0.0))
    if violations:
        logger.warning(f"{what} decreased at {violations} grid step(s); treated as Monte-Carlo noise")
    return violations


def monte_carlo_exit_curve(
    params: CodeParams, grid=None, config: ExitConfig | None = None
) -> ExitCurve:
    """Measure the decoder transfer function on the all-zero codeword.

    Every grid point feeds LLRs ~ N(m_a, 2 m_a) into all codeword positions
    and repeats the activation schedule with that fixed input until the
    emitted information settles (or exactly ``config.activations`` times).
    Grid points are decoded as a batch of independent rows.
    """
    config = config or ExitConfig()
    grid = _check_grid(default_grid(config.grid_points) if grid is None else grid)
    instance = build_code(params, config.info_len, derive_seed(config.seed, Component.INTERLEAVER))
    n, rep_len = instance.codeword_len, instance.rep_len
    rng = np.random.default_rng(derive_seed(config.seed, Component.EXIT, 1))

    I_rep = np.empty(grid.size)
    I_par = np.empty(grid.size)
    activations_used = []
    for start in range(0, grid.size, CURVE_CHUNK):
        rows = grid[start : start + CURVE_CHUNK]
        means = llr_mean(np.atleast_1d(rows))
        noise = rng.standard_normal((rows.size, n))
        llrs = means[:, None] + np.sqrt(2.0 * means)[:, None] * noise
        llrs[rows >= I_CEILING] = DEFAULT_LLR_CLIP

        state = DecoderState.fresh(instance, n_users=rows.size)
        budget = config.activations or config.max_activations
        previous = None
        for _ in range(budget):
            out = decode_activation(state, llrs)
            current = np.stack(
                [
                    llr_mutual_information(out[:, :rep_len], axis=1),
                    llr_mutual_information(out[:, rep_len:], axis=1),
                ]
            )
            if config.activations is None and previous is not None:
                if np.max(np.abs(current - previous)) < config.activation_tol:
                    break
            previous = current
        activations_used.append(state.activations)
        I_rep[start : start + rows.size] = np.clip(current[0], 0.0, 1.0)
        I_par[start : start + rows.size] = np.clip(current[1], 0.0, 1.0)

    f_rep = instance.rep_fraction
    I_e = f_rep * I_rep + (1.0 - f_rep) * I_par
    logger.info(
        f"Measured Monte-Carlo EXIT curve: {grid.size} points, N={instance.info_len}, "
        f"up to {max(activations_used)} activation(s) per point"
    )
    return ExitCurve(
        I_a=grid.tolist(),
        I_e=np.clip(I_e, 0.0, 1.0).tolist(),
        I_rep=I_rep.tolist(),
        I_par=I_par.tolist(),
        rep_fraction=f_rep,
        model="monte_carlo",
        monotone_violations=_count_violations(I_e, "Decoder EXIT curve"),
    )


def analytic_exit_curve(
    params: CodeParams, grid=None, config: ExitConfig | None = None
) -> ExitCurve:
    """Gaussian-approximation transfer function of the MU-IRA graph.

    Messages are tracked as mutual information: info node to check
    (edge-averaged over lambda), check to info, check to parity and parity
    to check, iterated to their fixed point for every grid point at once.
    """
    config = config or ExitConfig(exit_model="analytic")
    grid = _check_grid(default_grid(config.grid_points) if grid is None else grid)
    q, alpha = params.q, params.alpha
    degrees = np.asarray(params.lambda_.degrees, dtype=np.float64)[:, None]
    edge_frac = np.asarray(params.lambda_.fractions)[:, None]
    node_frac = np.asarray(params.lambda_.node_fractions())[:, None]

    ch = _j_inverse_unchecked(grid) ** 2  # channel LLR sigma^2 per grid point
    ch = np.where(grid >= I_CEILING, J_SIGMA_MAX**2, ch)
    jinv2 = lambda x: _j_inverse_unchecked(x) ** 2  # noqa: E731

    I_cv = np.zeros_like(grid)
    I_pc = np.zeros_like(grid)
    budget = config.activations or config.max_activations
    for it in range(budget):
        I_vc = np.sum(edge_frac * j_function(np.sqrt((degrees - 1.0) * jinv2(I_cv) + q * ch)), axis=0)
        dual_vc = jinv2(1.0 - I_vc)
        dual_pc = jinv2(1.0 - I_pc)
        I_cv_new = 1.0 - j_function(np.sqrt((alpha - 1.0) * dual_vc + 2.0 * dual_pc))
        I_cp = 1.0 - j_function(np.sqrt(alpha * dual_vc + dual_pc))
        I_pc_new = j_function(np.sqrt(jinv2(I_cp) + ch))
        delta = max(np.max(np.abs(I_cv_new - I_cv)), np.max(np.abs(I_pc_new - I_pc)))
        I_cv, I_pc = I_cv_new, I_pc_new
        if config.activations is None and delta < config.activation_tol:
            break

    I_cp = 1.0 - j_function(np.sqrt(alpha * jinv2(1.0 - I_vc) + jinv2(1.0 - I_pc)))
    I_rep = np.sum(node_frac * j_function(np.sqrt(degrees * jinv2(I_cv) + (q - 1.0) * ch)), axis=0)
    I_par = j_function(np.sqrt(2.0 * jinv2(I_cp)))
    I_rep, I_par = np.clip(I_rep, 0.0, 1.0), np.clip(I_par, 0.0, 1.0)

    f_rep = q * params.rate
    I_e = f_rep * I_rep + (1.0 - f_rep) * I_par
    logger.debug(f"Analytic EXIT curve settled after {it + 1} iteration(s)")
    return ExitCurve(
        I_a=grid.tolist(),
        I_e=np.clip(I_e, 0.0, 1.0).tolist(),
        I_rep=I_rep.tolist(),
        I_par=I_par.tolist(),
        rep_fraction=min(f_rep, 1.0),
        model="analytic",
        monotone_violations=_count_violations(I_e, "Analytic EXIT curve"),
    )


def decoder_exit_curve(params: CodeParams, grid=None, config: ExitConfig | None = None) -> ExitCurve:
    """EXIT curve with the model selected by ``config.exit_model``."""
    config = config or ExitConfig()
    if config.exit_model == "analytic":
        return analytic_exit_curve(params, grid, config)
    return monte_carlo_exit_curve(params, grid, config)


def operating_grid(K: int, M: int, sigma_lo: float, sigma_hi: float, points: int) -> np.ndarray:
    """I_a grid covering what the detector can deliver for sigma_n in [sigma_lo, sigma_hi].

    Runs from the uninformed detector output (v = 1) at the noisiest level to
    the perfect-feedback ceiling at the cleanest, uniform in J^-1(I_a).
    """
    _check_positive(K=K, M=M, sigma_lo=sigma_lo, sigma_hi=sigma_hi)
    if points < 2:
        raise ConfigError(f"must be >= 2, got {points}", field="points")
    clean, noisy = sorted((sigma_lo, sigma_hi))
    a_lo = math.sqrt(4.0 / lmmse_variance_transfer(1.0, K, M, noisy))
    a_hi = min(math.sqrt(4.0 / lmmse_variance_transfer(1e-300, K, M, clean)), OPERATING_SIGMA_CAP)
    # a detector that alone saturates the decoder still gets a band below the cap
    a_lo = min(a_lo, OPERATING_SIGMA_CAP / 2.0)
    grid = np.clip(j_function(np.linspace(a_lo, a_hi, points)), 0.0, 1.0)
    grid = np.unique(grid)
    if grid.size < 2:
        raise ConfigError("operating range collapses to a single point", field="sigma_n")
    return grid


def merge_curves(base: ExitCurve, extra: ExitCurve) -> ExitCurve:
    """Union of two samplings of the same decoder curve, sorted by I_a.

    Where both carry the same I_a the ``extra`` sample wins.
    """
    if base.model != extra.model or not math.isclose(base.rep_fraction, extra.rep_fraction):
        raise ConfigError("curves describe different decoders", field="curve")
    I_a = np.concatenate([extra.I_a, base.I_a])
    _, first = np.unique(I_a, return_index=True)
    stacked = {
        name: np.concatenate([getattr(extra, name), getattr(base, name)])[first]
        for name in ("I_a", "I_e", "I_rep", "I_par")
    }
    return ExitCurve(
        **{name: values.tolist() for name, values in stacked.items()},
        rep_fraction=base.rep_fraction,
        model=base.model,
        monotone_violations=int(np.count_nonzero(np.diff(stacked["I_e"]) < 0.0)),
    )


class CurveCache:
    """EXIT curves keyed by code parameters and measurement settings."""

    def __init__(self) -> None:
        self._curves: dict[tuple, ExitCurve] = {}
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(params: CodeParams, config: ExitConfig) -> tuple:
        return (
            json.dumps(params.to_config(), sort_keys=True),
            config.exit_model,
            config.grid_points,
            config.info_len,
            config.activations,
            config.max_activations,
            config.activation_tol,
            config.seed,
        )

    def get(self, params: CodeParams, config: ExitConfig) -> ExitCurve:
        key = self.key(params, config)
        if key in self._curves:
            self.hits += 1
            return self._curves[key]
        self.misses += 1
        curve = decoder_exit_curve(params, None, config)
        self._curves[key] = curve
        logger.info(f"Cached {config.exit_model} EXIT curve ({len(self._curves)} in cache)")
        return curve

    def clear(self) -> None:
        self._curves.clear()

    def __len__(self) -> int:
        return len(self._curves)


_default_cache = CurveCache()


def get_exit_curve(
    params: CodeParams, config: ExitConfig | None = None, cache: CurveCache | None = None
) -> ExitCurve:
    """Cached :func:`decoder_exit_curve` over the default grid."""
    cache = cache if cache is not None else _default_cache
    return cache.get(params, config or ExitConfig())


# ============================================================================
# Recursion, tunnel gap and threshold
# ============================================================================


class _CurveLookup:
    """Monotone envelope of a curve, interpolated per bit class."""

    def __init__(self, curve: ExitCurve):
        self.grid = np.asarray(curve.I_a)
        self.rep = np.maximum.accumulate(np.asarray(curve.I_rep))
        self.par = np.maximum.accumulate(np.asarray(curve.I_par))
        self.f_rep = curve.rep_fraction

    def __call__(self, I_a):
        I_rep = np.interp(I_a, self.grid, self.rep)
        I_par = np.interp(I_a, self.grid, self.par)
        return I_rep, I_par, self.f_rep * I_rep + (1.0 - self.f_rep) * I_par

    def feedback(self, I_rep, I_par, config: ExitConfig):
        psi = functools.partial(feedback_variance, samples=config.variance_samples, seed=config.seed)
        return self.f_rep * psi(I_rep) + (1.0 - self.f_rep) * psi(I_par)


def ebn0_to_sigma(ebn0_db: float, rate: float) -> float:
    """Noise std from E_b/N_0 = 1 / (2 R sigma^2) at unit symbol power."""
    if rate <= 0:
        raise ConfigError(f"must be > 0, got {rate}", field="rate")
    return math.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0)))


def sigma_to_ebn0(sigma_n: float, rate: float) -> float:
    if sigma_n <= 0 or rate <= 0:
        raise ConfigError("sigma_n and rate must be > 0", field="sigma_n")
    return 10.0 * math.log10(1.0 / (2.0 * rate * sigma_n**2))


def run_exit_recursion(
    curve: ExitCurve,
    K: int,
    M: int,
    sigma_n: float,
    config: ExitConfig | None = None,
    *,
    max_iters: int | None = None,
    asymptotic: bool = False,
) -> ExitTrajectory:
    """Iterate detector transfer, curve lookup and feedback variance.

    Converged when v_e <= eps_conv or the decoder output reaches
    1 - eps_conv; stalled when |dv| stays below ``stall_tol`` for
    ``stall_window`` consecutive iterations; otherwise undetermined.
    """
    config = config or ExitConfig()
    _check_positive(sigma_n=sigma_n, K=K, M=M)
    transfer = lmmse_variance_transfer_asymptotic if asymptotic else lmmse_variance_transfer
    lookup = _CurveLookup(curve)
    limit = max_iters or config.max_iters
    eps = config.eps_conv

    states: list[ExitState] = []
    v = 1.0
    quiet = 0
    verdict = "undetermined"
    for it in range(1, limit + 1):
        v_e = transfer(max(v, 1e-300), K, M, sigma_n)
        I_a = float(variance_to_mutual_info(v_e))
        I_rep, I_par, I_e = (float(x) for x in lookup(I_a))
        states.append(
            ExitState(
                iteration=it,
                v=v,
                v_e=v_e,
                I_a=min(max(I_a, 0.0), 1.0),
                I_e=min(max(I_e, 0.0), 1.0),
                m_a=2.0 / v_e,
                m_e=float(llr_mean(I_e)),
            )
        )
        if v_e <= eps or I_e >= 1.0 - eps:
            verdict = "converged"
            break
        v_next = float(lookup.feedback(I_rep, I_par, config))
        quiet = quiet + 1 if abs(v_next - v) < config.stall_tol else 0
        logger.debug(f"iter {it}: v={v:.6g} v_e={v_e:.6g} I_a={I_a:.6f} I_e={I_e:.6f}")
        v = v_next
        if quiet >= config.stall_window:
            verdict = "stalled"
            break

    return ExitTrajectory(
        states=states,
        verdict=verdict,
        iterations_used=len(states),
        sigma_n=sigma_n,
        K=K,
        M=M,
    )


def tunnel_gap(
    curve: ExitCurve,
    K: int,
    M: int,
    sigma_n: float,
    config: ExitConfig | None = None,
    points: int = 200,
) -> float:
    """Smallest one-cycle information gain along the reachable I_a range.

    Each point I_a is mapped through the decoder curve, the feedback
    variance and the detector back to a new I_a; the gain is the difference.
    Points where the decoder output is already saturated are skipped. A
    positive result means the tunnel is open.
    """
    config = config or ExitConfig()
    lookup = _CurveLookup(curve)
    start = float(variance_to_mutual_info(lmmse_variance_transfer(1.0, K, M, sigma_n)))
    ceiling = float(variance_to_mutual_info(lmmse_variance_transfer(1e-300, K, M, sigma_n)))
    if ceiling <= start:
        return 0.0
    I_a = np.linspace(start, ceiling, points, endpoint=False)
    I_rep, I_par, I_e = lookup(I_a)
    active = I_e < 1.0 - config.eps_conv
    if not active.any():
        return ceiling - start
    v = np.clip(lookup.feedback(I_rep[active], I_par[active], config), 1e-300, None)
    after = variance_to_mutual_info(lmmse_variance_transfer(v, K, M, sigma_n))
    return float(np.min(after - I_a[active]))


def _verdict(curve, K, M, ebn0_db, rate, config) -> str:
    sigma = ebn0_to_sigma(ebn0_db, rate)
    return run_exit_recursion(curve, K, M, sigma, config).verdict


def _converges(curve, K, M, ebn0_db, rate, config) -> bool:
    return _verdict(curve, K, M, ebn0_db, rate, config) == "converged"


def _boundaries(curve, K, M, points: np.ndarray, rate: float, config, resolution_db: float):
    """Verdicts at ``points`` and every not-converged/converged boundary bisected."""
    outcomes = [_verdict(curve, K, M, e, rate, config) for e in points]
    verdicts = [o == "converged" for o in outcomes]
    candidates = []
    for i in range(len(points) - 1):
        if not verdicts[i] and verdicts[i + 1]:
            a, b = float(points[i]), float(points[i + 1])
            while b - a > resolution_db:
                mid = (a + b) / 2.0
                if _converges(curve, K, M, mid, rate, config):
                    b = mid
                else:
                    a = mid
            candidates.append(b)
    return outcomes, candidates


def _scan_points(lo: float, hi: float, step: float) -> np.ndarray:
    return np.append(np.arange(lo, hi, step), hi)


def decoding_threshold(
    params: CodeParams,
    K: int,
    M: int,
    window: Sequence[float] = (-15.0, 10.0),
    *,
    config: ExitConfig | None = None,
    resolution_db: float = 0.01,
    scan_step_db: float = 0.25,
    cache: CurveCache | None = None,
    curve: ExitCurve | None = None,
) -> ThresholdReport:
    """Smallest E_b/N_0 (dB) in ``window`` at which the recursion converges.

    The window is scanned first; every not-converged/converged boundary is
    then bisected to ``resolution_db``. With several boundaries the report is
    flagged non-monotone, lists all candidates, and returns the highest one.
    The top of the window must reach a verdict (ConvergenceError otherwise).

    With ``config.refine_points`` > 0 the curve is then re-sampled on the I_a
    range the detector delivers between ``REFINE_BELOW_DB`` under and
    ``REFINE_ABOVE_DB`` over the coarse threshold, merged with the coarse
    samples, and the search repeated on that band. A supplied ``curve`` of
    another model than ``config.exit_model`` is not refined.
    """
    config = config or ExitConfig()
    lo, hi = float(window[0]), float(window[1])
    if hi <= lo:
        raise ConfigError(f"window must be increasing, got {tuple(window)}", field="window")
    rate = params.rate
    curve = curve if curve is not None else get_exit_curve(params, config, cache)

    outcomes, candidates = _boundaries(curve, K, M, _scan_points(lo, hi, scan_step_db), rate, config, resolution_db)
    if outcomes[-1] == "undetermined":
        raise ConvergenceError(
            "EXIT recursion ended without a verdict at the top of the window",
            f"{hi} dB after {config.max_iters} iterations; raise max_iters",
        )
    top, bottom = outcomes[-1] == "converged", outcomes[0] == "converged"
    if not top or bottom:
        raise InfeasibleError(
            "threshold window does not bracket the convergence boundary",
            f"[{lo}, {hi}] dB gives converged={bottom} at the low end and converged={top} at the high end",
        )

    refined = False
    if config.refine_points > 0 and curve.model == config.exit_model:
        band_lo = max(lo, max(candidates) - REFINE_BELOW_DB)
        band_hi = min(hi, max(candidates) + REFINE_ABOVE_DB)
        grid = operating_grid(
            K, M, ebn0_to_sigma(band_hi, rate), ebn0_to_sigma(band_lo, rate), config.refine_points
        )
        fine = merge_curves(curve, decoder_exit_curve(params, grid, config))
        band_out, band_candidates = _boundaries(
            fine, K, M, _scan_points(band_lo, band_hi, scan_step_db), rate, config, resolution_db
        )
        if band_out[-1] == "converged" and band_out[0] != "converged":
            logger.info(
                f"Refined curve over [{band_lo:.2f}, {band_hi:.2f}] dB: "
                f"{max(candidates):.2f} -> {max(band_candidates):.2f} dB"
            )
            candidates, refined = band_candidates, True
        else:
            logger.warning(
                f"Refined curve does not bracket the threshold in [{band_lo:.2f}, {band_hi:.2f}] dB; "
                "keeping the coarse-grid result"
            )

    monotone = len(candidates) == 1
    if not monotone:
        logger.warning(f"Non-monotone threshold window: boundaries at {candidates} dB")
    threshold = max(candidates)
    logger.info(f"Decoding threshold {threshold:.2f} dB (R={rate:.4f}, K={K}, M={M})")
    return ThresholdReport(
        threshold_db=threshold,
        sigma_n=ebn0_to_sigma(threshold, rate),
        rate=rate,
        K=K,
        M=M,
        resolution_db=resolution_db,
        monotone=monotone,
        candidates_db=candidates,
        refined=refined,
    )

"""
Monte-Carlo BER simulation of the full iterative receiver.

Per frame: draw data for K users, encode with their own interleavers,
transmit over the fading channel, then alternate LMMSE detection and one
decoder activation per user for up to ``tau_max`` global iterations.

Frames are independent and seeded from (master seed, point index, frame
index). With ``workers > 1`` they run in a process pool but are aggregated
in frame order, so results do not depend on the worker count.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats
from tqdm import tqdm

from muira.channel import sample_channel, transmit, with_estimation_error
from muira.codec import (
    CodeInstance,
    DecoderState,
    build_code,
    decode_activation,
    hard_decision,
    modulate,
    syndrome_ok,
    to_codeword_order,
    to_symbol_order,
)
from muira.config import NumericsConfig, SimConfig
from muira.detector import GaussianMessageVector, prior_from_decoder, soft_detect
from muira.exceptions import InfeasibleError, NumericalError
from muira.exit_analysis import ebn0_to_sigma
from muira.models import BerPoint, BerResult, CodeParams, CsiModel, SystemDims
from muira.presets import resolve_code
from muira.seeding import Component, derive_seed, make_rng

logger = logging.getLogger(__name__)

DETECT_CHUNK = 1024
CONFIDENCE = 0.95


@dataclass(frozen=True)
class FrameOutcome:
    user_errors: np.ndarray
    iterations: int
    declared: bool
    failed: bool = False


@dataclass(frozen=True)
class FrameJob:
    """Everything a worker needs to simulate one frame."""

    instance: CodeInstance
    dims: SystemDims
    sigma_n: float
    tau_max: int
    coherence_len: int
    csi: CsiModel
    numerics: NumericsConfig
    early_stop: bool
    seed: int
    point: int
    frame: int


def clopper_pearson(errors: int, trials: int, confidence: float = CONFIDENCE) -> tuple[float, float]:
    """Exact binomial confidence interval for errors / trials."""
    if trials == 0:
        return 0.0, 1.0
    tail = (1.0 - confidence) / 2.0
    low = 0.0 if errors == 0 else float(stats.beta.ppf(tail, errors, trials - errors + 1))
    high = 1.0 if errors == trials else float(stats.beta.ppf(1.0 - tail, errors + 1, trials - errors))
    return low, high


def _detect(blocks, Y, sigma_n, prior, numerics):
    """LMMSE pass over all symbols, in slot chunks to bound memory."""
    K, n = prior.means.shape
    llrs = np.empty((K, n))
    for blk in blocks:
        for start in range(blk.start, blk.stop, DETECT_CHUNK):
            stop = min(start + DETECT_CHUNK, blk.stop)
            chunk_prior = GaussianMessageVector(prior.means[:, start:stop], prior.variances[:, start:stop])
            llrs[:, start:stop], _ = soft_detect(
                Y[:, start:stop],
                blk.receiver_H,
                sigma_n,
                chunk_prior,
                llr_clip=numerics.llr_clip,
                cap=numerics.extrinsic_cap,
            )
    return llrs


def _detect_fast(H_rx, Y, sigma_n, prior, numerics):
    """Fast fading: one channel matrix per symbol slot."""
    K, n = prior.means.shape
    llrs = np.empty((K, n))
    for start in range(0, n, DETECT_CHUNK):
        stop = min(start + DETECT_CHUNK, n)
        chunk_prior = GaussianMessageVector(prior.means[:, start:stop], prior.variances[:, start:stop])
        llrs[:, start:stop], _ = soft_detect(
            Y[:, start:stop],
            H_rx[start:stop],
            sigma_n,
            chunk_prior,
            llr_clip=numerics.llr_clip,
            cap=numerics.extrinsic_cap,
        )
    return llrs


def simulate_frame(job: FrameJob) -> FrameOutcome:
    """Transmit and iteratively decode one frame for all K users.

    A frame whose receiver hits a non-finite message or a singular detector
    matrix comes back marked ``failed`` instead of ending the run.
    """
    try:
        return _decode_frame(job)
    except NumericalError as e:
        logger.warning(f"Frame {job.frame} at point {job.point} failed: {e}")
        return FrameOutcome(
            user_errors=np.zeros(job.dims.K, dtype=np.int64), iterations=0, declared=False, failed=True
        )


def _decode_frame(job: FrameJob) -> FrameOutcome:
    inst, dims = job.instance, job.dims
    K, n = dims.K, inst.codeword_len
    idx = (job.point, job.frame)

    bits = make_rng(job.seed, Component.DATA, *idx).integers(0, 2, (K, inst.info_len), dtype=np.int8)
    X = modulate(inst, bits)
    blocks = sample_channel(
        dims, n, job.coherence_len, derive_seed(job.seed, Component.CHANNEL, *idx), sigma_n=job.sigma_n
    )
    if not job.csi.perfect:
        blocks = with_estimation_error(blocks, job.csi, derive_seed(job.seed, Component.CSI, *idx))
    Y = transmit(X, blocks, derive_seed(job.seed, Component.NOISE, *idx))

    if job.coherence_len == 1:
        H_rx = np.stack([blk.receiver_H for blk in blocks])

        def detect(prior):
            return _detect_fast(H_rx, Y, job.sigma_n, prior, job.numerics)
    else:

        def detect(prior):
            return _detect(blocks, Y, job.sigma_n, prior, job.numerics)

    state = DecoderState.fresh(inst, n_users=K, llr_clip=job.numerics.llr_clip)
    prior = GaussianMessageVector.uninformative(K, n)
    decoded = np.zeros(K, dtype=bool)
    for _ in range(job.tau_max):
        symbol_llrs = detect(prior)
        extrinsic = decode_activation(state, to_codeword_order(inst, symbol_llrs))
        decoded = syndrome_ok(state)
        if job.early_stop and decoded.all():
            break
        prior = prior_from_decoder(to_symbol_order(inst, extrinsic), job.numerics.variance_floor)

    user_errors = np.count_nonzero(hard_decision(state) != bits, axis=1)
    return FrameOutcome(user_errors=user_errors, iterations=state.activations, declared=bool(decoded.all()))


def check_dims(config: SimConfig) -> tuple[CodeParams, str | None]:
    """Resolve the code and refuse presets run at foreign dims unless allowed."""
    params, preset = resolve_code(config.code)
    if preset is None or preset.K is None:
        return params, None if preset is None else preset.name
    mismatch = preset.K != config.dims.K or preset.M != config.dims.M
    if mismatch and not config.dynamic_load:
        raise InfeasibleError(
            f"preset '{preset.name}' was designed for K={preset.K}, M={preset.M}",
            f"got K={config.dims.K}, M={config.dims.M}; set dynamic_load to run it anyway",
        )
    if mismatch:
        logger.info(
            f"Dynamic load: preset '{preset.name}' (beta={preset.K / preset.M:g}) "
            f"at beta={config.dims.beta:g}"
        )
    return params, preset.name


class _PointAccumulator:
    def __init__(self, K: int, bits_per_frame: int):
        self.K = K
        self.bits_per_frame = bits_per_frame
        self.frames = 0
        self.failed = 0
        self.frame_errors = 0
        self.declared = 0
        self.undetected = 0
        self.iterations = 0
        self.user_errors = np.zeros(K, dtype=np.int64)

    def add(self, outcome: FrameOutcome) -> None:
        self.frames += 1
        if outcome.failed:
            self.failed += 1
            self.frame_errors += 1
            return
        errors = int(outcome.user_errors.sum())
        self.user_errors += outcome.user_errors
        self.iterations += outcome.iterations
        self.frame_errors += int(errors > 0)
        if outcome.declared:
            self.declared += 1
            self.undetected += int(errors > 0)

    @property
    def errors(self) -> int:
        return int(self.user_errors.sum())

    @property
    def bits(self) -> int:
        return (self.frames - self.failed) * self.bits_per_frame

    @property
    def decoded(self) -> int:
        return self.frames - self.failed

    def done(self, stop) -> bool:
        if self.frames >= stop.max_frames:
            return True
        return self.frames >= stop.min_frames and self.errors >= stop.max_bit_errors


def _frame_outcomes(jobs_for, stop, workers: int):
    """Yield frame outcomes in frame order, in waves of ``workers`` frames."""
    if workers == 1:
        for frame in range(stop.max_frames):
            yield simulate_frame(jobs_for(frame))
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for wave in range(0, stop.max_frames, workers):
            frames = range(wave, min(wave + workers, stop.max_frames))
            yield from pool.map(simulate_frame, [jobs_for(f) for f in frames])


def run_ber_simulation(config: SimConfig, *, progress: bool = False) -> BerResult:
    """Simulate every E_b/N_0 point of ``config``.

    Errors are counted over info bits of all users. The stop rule is checked
    after each frame in frame order.
    """
    params, preset_name = check_dims(config)
    dims = config.dims
    instance = build_code(
        params, config.info_len, derive_seed(config.seed, Component.INTERLEAVER), n_users=dims.K
    )
    logger.info(
        f"BER run: K={dims.K}, M={dims.M}, code={preset_name or 'custom'}, "
        f"R={params.rate:.4f}, n={instance.codeword_len}, tau_max={config.tau_max}, "
        f"fading={config.fading}"
    )

    points = []
    for p, ebn0 in enumerate(config.ebn0_grid):
        sigma = ebn0_to_sigma(ebn0, params.rate)

        def jobs_for(frame, p=p, sigma=sigma):
            return FrameJob(
                instance=instance,
                dims=dims,
                sigma_n=sigma,
                tau_max=config.tau_max,
                coherence_len=config.fading.coherence_len,
                csi=config.csi,
                numerics=config.numerics,
                early_stop=config.early_stop,
                seed=config.seed,
                point=p,
                frame=frame,
            )

        acc = _PointAccumulator(dims.K, dims.K * instance.info_len)
        bar = tqdm(
            total=config.stop.max_frames,
            desc=f"{ebn0:+.2f} dB",
            unit="frame",
            disable=not progress,
            leave=False,
        )
        outcomes = _frame_outcomes(jobs_for, config.stop, config.workers)
        for outcome in outcomes:
            acc.add(outcome)
            bar.update(1)
            bar.set_postfix(errors=acc.errors)
            if acc.done(config.stop):
                break
        outcomes.close()
        bar.close()

        low, high = clopper_pearson(acc.errors, acc.bits)
        point = BerPoint(
            ebn0_db=ebn0,
            sigma_n=sigma,
            tau_max=config.tau_max,
            bits=acc.bits,
            errors=acc.errors,
            frames=acc.frames,
            frame_errors=acc.frame_errors,
            ci_low=low,
            ci_high=high,
            mean_iterations=acc.iterations / acc.decoded if acc.decoded else 0.0,
            undetected_frames=acc.undetected,
            declared_frames=acc.declared,
            failed_frames=acc.failed,
            user_errors=acc.user_errors.tolist(),
        )
        logger.info(
            f"{ebn0:+.2f} dB: BER={point.ber:.3e} ({acc.errors}/{acc.bits}) over {acc.frames} frame(s), "
            f"mean iterations {point.mean_iterations:.1f}"
        )
        if acc.failed:
            logger.warning(f"{acc.failed} frame(s) at {ebn0:+.2f} dB failed numerically and count as frame errors")
        if acc.undetected:
            logger.warning(f"{acc.undetected} frame(s) passed the syndrome test with bit errors")
        points.append(point)

    return BerResult(points=points, config=config.to_config())

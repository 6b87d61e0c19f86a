"""
Capacity limits in E_b/N_0 for the MIMO-NOMA uplink and for a single user
on the real AWGN channel.

The MIMO sum capacity is averaged over a fixed set of channel draws, so the
function of sigma being solved is deterministic and the root search is
exact for that sample.
"""

import itertools
import logging
import math
from typing import Literal

import numpy as np
from scipy import optimize

from muira.exceptions import ConfigError, InfeasibleError
from muira.exit_analysis import ebn0_to_sigma, j_inverse
from muira.models import CapacityReport, SystemDims
from muira.seeding import Component, derive_seed

logger = logging.getLogger(__name__)

InputKind = Literal["gaussian", "bpsk"]
BPSK_MAX_USERS = 12
BPSK_CHUNK_ELEMENTS = 2_000_000
MIN_MC_SAMPLES = 10_000
DEFAULT_WINDOW_DB = (-30.0, 30.0)


def point_to_point_capacity_limit(rate: float, input: InputKind = "gaussian") -> float:
    """Smallest E_b/N_0 (dB) at which one user achieves ``rate`` on real AWGN.

    Gaussian input: (2^(2R) - 1) / (2R). BPSK input: solve J(2/sigma) = R.
    """
    if rate <= 0:
        raise ConfigError(f"must be > 0, got {rate}", field="rate")
    if input == "gaussian":
        return 10.0 * math.log10((2.0 ** (2.0 * rate) - 1.0) / (2.0 * rate))
    if input == "bpsk":
        if rate >= 1.0:
            raise InfeasibleError("BPSK carries at most 1 bit per symbol", f"rate={rate}")
        sigma = 2.0 / j_inverse(rate)
        return 10.0 * math.log10(1.0 / (2.0 * rate * sigma**2))
    raise ConfigError(f"unknown input '{input}'", field="input")


def _gram_eigenvalues(dims: SystemDims, samples: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(derive_seed(seed, Component.CHANNEL, 0))
    H = rng.standard_normal((samples, dims.M, dims.K))
    gram = H @ H.transpose(0, 2, 1) if dims.M <= dims.K else H.transpose(0, 2, 1) @ H
    return np.clip(np.linalg.eigvalsh(gram), 0.0, None)


def _gaussian_capacity(eigs: np.ndarray, sigma: float) -> np.ndarray:
    """Per-draw capacity 1/2 sum log2(1 + lambda / sigma^2)."""
    return 0.5 * np.sum(np.log2(1.0 + eigs / sigma**2), axis=-1)


class _BpskSample:
    """Fixed draws for the BPSK-input mutual information estimate.

    Draws are evaluated in chunks so that at most ``BPSK_CHUNK_ELEMENTS``
    hypothesis distances are held at once.
    """

    def __init__(self, dims: SystemDims, samples: int, seed: int):
        if dims.K > BPSK_MAX_USERS:
            raise ConfigError(
                f"BPSK-input capacity enumerates 2^K hypotheses; K <= {BPSK_MAX_USERS}",
                field="K",
            )
        rng = np.random.default_rng(derive_seed(seed, Component.CHANNEL, 1))
        self.K = dims.K
        self.H = rng.standard_normal((samples, dims.M, dims.K))
        self.x = 1.0 - 2.0 * rng.integers(0, 2, (samples, dims.K))
        self.z = rng.standard_normal((samples, dims.M))
        self.hyps = np.array(list(itertools.product((1.0, -1.0), repeat=dims.K)))
        self.chunk = max(1, BPSK_CHUNK_ELEMENTS // (self.hyps.shape[0] * dims.M))

    def per_draw(self, sigma: float) -> np.ndarray:
        out = np.empty(self.H.shape[0])
        for start in range(0, out.size, self.chunk):
            rows = slice(start, start + self.chunk)
            # H (x - x') for every hypothesis x'
            shift = np.einsum("smk,shk->shm", self.H[rows], self.x[rows, None, :] - self.hyps[None, :, :])
            noise = sigma * self.z[rows, None, :]
            metric = -(np.sum((shift + noise) ** 2, axis=-1) - np.sum(noise**2, axis=-1)) / (2.0 * sigma**2)
            out[rows] = self.K - np.logaddexp.reduce(metric, axis=-1) / math.log(2.0)
        return out


def mimo_noma_capacity_limit(
    dims: SystemDims,
    rate: float,
    mc_samples: int = 10_000,
    *,
    input: InputKind = "gaussian",
    seed: int = 0,
    window_db=DEFAULT_WINDOW_DB,
    tolerance_db: float = 1e-3,
) -> CapacityReport:
    """E_b/N_0 (dB) at which the average sum capacity equals K R.

    Gaussian input uses 1/2 E[log2 det(I + H H^T / sigma^2)] through the
    eigenvalues of the smaller Gram matrix. BPSK input estimates the sum
    mutual information over channel, symbol and noise draws.
    """
    if rate <= 0:
        raise ConfigError(f"must be > 0, got {rate}", field="rate")
    if mc_samples < MIN_MC_SAMPLES:
        raise ConfigError(f"must be >= {MIN_MC_SAMPLES}, got {mc_samples}", field="mc_samples")
    target = dims.K * rate

    if input == "gaussian":
        eigs = _gram_eigenvalues(dims, mc_samples, seed)

        def per_draw(sigma):
            return _gaussian_capacity(eigs, sigma)
    elif input == "bpsk":
        if rate >= 1.0:
            raise InfeasibleError("BPSK carries at most 1 bit per symbol", f"rate={rate}")
        sample = _BpskSample(dims, mc_samples, seed)
        per_draw = sample.per_draw
    else:
        raise ConfigError(f"unknown input '{input}'", field="input")

    def excess(ebn0_db):
        return float(per_draw(ebn0_to_sigma(ebn0_db, rate)).mean()) - target

    lo, hi = window_db
    f_lo, f_hi = excess(lo), excess(hi)
    if f_lo > 0 or f_hi < 0:
        raise InfeasibleError(
            "capacity window does not bracket the sum rate",
            f"capacity - K R is {f_lo:.4g} at {lo} dB and {f_hi:.4g} at {hi} dB",
        )
    limit = optimize.brentq(excess, lo, hi, xtol=tolerance_db)
    sigma = ebn0_to_sigma(limit, rate)

    draws = per_draw(sigma)
    se_bits = float(draws.std(ddof=1) / math.sqrt(mc_samples))
    step = 0.05
    slope = (excess(limit + step) - excess(limit - step)) / (2 * step)
    se_db = se_bits / slope if slope > 0 else 0.0

    logger.info(
        f"{input} capacity limit for K={dims.K}, M={dims.M}, R={rate:.4f}: {limit:.3f} dB "
        f"(+- {se_db:.3f} dB)"
    )
    return CapacityReport(
        limit_db=float(limit),
        sigma_n=sigma,
        rate=rate,
        K=dims.K,
        M=dims.M,
        input=input,
        samples=mc_samples,
        std_error_bits=se_bits,
        std_error_db=float(se_db),
    )

"""
Real-valued MIMO-NOMA channel: fading draws, BPSK mapping, Y = HX + z,
and additive channel-estimation error.

All functions are pure given their seed arguments. A seed may be an int,
a ``numpy.random.SeedSequence`` or a ready ``numpy.random.Generator``.
"""

import dataclasses
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from muira.exceptions import ConfigError
from muira.models import CsiModel, SystemDims

logger = logging.getLogger(__name__)

SeedLike = int | np.random.SeedSequence | np.random.Generator


@dataclass(frozen=True)
class ChannelRealization:
    """One fading block: a channel matrix valid for symbols [start, stop).

    ``H`` is what the channel applies; ``H_est`` is what the receiver
    believes (equal to ``H`` under perfect CSI). ``sigma_n = 0`` is the
    noiseless limit.
    """

    H: np.ndarray
    sigma_n: float
    coherence_len: int
    start: int
    stop: int
    H_est: np.ndarray | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.H)):
            raise ConfigError("channel matrix has non-finite entries", field="H")
        if self.sigma_n < 0:
            raise ConfigError(f"must be >= 0, got {self.sigma_n}", field="sigma_n")
        if self.coherence_len < 1 or self.stop <= self.start:
            raise ConfigError("empty or invalid symbol range", field="coherence_len")

    @property
    def receiver_H(self) -> np.ndarray:
        return self.H if self.H_est is None else self.H_est

    @property
    def n_symbols(self) -> int:
        return self.stop - self.start


def sample_channel(
    dims: SystemDims,
    n_symbols: int,
    coherence_len: int,
    rng_seed: SeedLike,
    sigma_n: float = 1.0,
) -> list[ChannelRealization]:
    """Draw ceil(n_symbols / coherence_len) i.i.d. N(0, 1) channel matrices.

    Block ``b`` covers symbols ``[b * coherence_len, min((b + 1) * coherence_len, n_symbols))``
    so every symbol is covered exactly once.
    """
    if n_symbols < 1:
        raise ConfigError(f"must be >= 1, got {n_symbols}", field="n_symbols")
    if coherence_len < 1:
        raise ConfigError(f"must be >= 1, got {coherence_len}", field="coherence_len")

    rng = np.random.default_rng(rng_seed)
    n_blocks = math.ceil(n_symbols / coherence_len)
    draws = rng.standard_normal((n_blocks, dims.M, dims.K))
    blocks = []
    for b in range(n_blocks):
        start = b * coherence_len
        stop = min(start + coherence_len, n_symbols)
        blocks.append(
            ChannelRealization(
                H=draws[b],
                sigma_n=sigma_n,
                coherence_len=coherence_len,
                start=start,
                stop=stop,
            )
        )
    logger.debug(
        f"Sampled {n_blocks} channel block(s) of {coherence_len} symbol(s) for K={dims.K}, M={dims.M}"
    )
    return blocks


def per_symbol(blocks: Sequence[ChannelRealization], *, receiver: bool = False) -> np.ndarray:
    """Expand blocks into a (T, M, K) stack with one matrix per symbol slot."""
    mats = [blk.receiver_H if receiver else blk.H for blk in blocks]
    counts = [blk.n_symbols for blk in blocks]
    return np.repeat(np.stack(mats), counts, axis=0)


def modulate_bpsk(bits: np.ndarray) -> np.ndarray:
    """Map bit 0 to +1 and bit 1 to -1."""
    bits = np.asarray(bits)
    if bits.size and not np.all((bits == 0) | (bits == 1)):
        raise ConfigError("bits must be 0 or 1", field="bits")
    return 1.0 - 2.0 * bits.astype(np.float64)


def transmit(
    X: np.ndarray,
    channel: Sequence[ChannelRealization],
    rng_seed: SeedLike,
) -> np.ndarray:
    """Apply Y[:, t] = H(t) X[:, t] + z(t) with z(t) ~ N(0, sigma_n^2 I_M)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ConfigError(f"X must be K x T, got shape {X.shape}", field="X")
    if not channel:
        raise ConfigError("no channel blocks given", field="channel")
    M, K = channel[0].H.shape
    if X.shape[0] != K:
        raise ConfigError(f"X has {X.shape[0]} rows but the channel has K={K}", field="X")
    T = X.shape[1]
    if channel[0].start != 0 or channel[-1].stop != T:
        raise ConfigError(
            f"channel covers [{channel[0].start}, {channel[-1].stop}) but X has {T} symbols",
            field="channel",
        )

    Y = np.empty((M, T))
    for blk in channel:
        Y[:, blk.start : blk.stop] = blk.H @ X[:, blk.start : blk.stop]

    rng = np.random.default_rng(rng_seed)
    noise = rng.standard_normal((M, T))
    sigmas = np.repeat([blk.sigma_n for blk in channel], [blk.n_symbols for blk in channel])
    return Y + noise * sigmas[np.newaxis, :]


def corrupt_csi(H: np.ndarray, model: CsiModel, rng_seed: SeedLike) -> np.ndarray:
    """Return H_est = H + E with E i.i.d. N(0, error_variance)."""
    if model.error_variance < 0:
        raise ConfigError("must be >= 0", field="error_variance")
    H = np.asarray(H, dtype=np.float64)
    if model.perfect:
        return H.copy()
    rng = np.random.default_rng(rng_seed)
    return H + math.sqrt(model.error_variance) * rng.standard_normal(H.shape)


def with_estimation_error(
    blocks: Sequence[ChannelRealization], model: CsiModel, rng_seed: SeedLike
) -> list[ChannelRealization]:
    """Attach an independently drawn H_est to every fading block."""
    rng = np.random.default_rng(rng_seed)
    return [dataclasses.replace(blk, H_est=corrupt_csi(blk.H, model, rng)) for blk in blocks]

"""
LMMSE multi-user detector with Gaussian message passing.

Every operation is batched over symbol slots: message vectors hold arrays of
shape ``(K,)`` or ``(K, T)`` and the channel may be a single ``(M, K)``
matrix or one matrix per slot, ``(T, M, K)``.
"""

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np

from muira.exceptions import ConfigError, NumericalError

logger = logging.getLogger(__name__)

DEFAULT_LLR_CLIP = 50.0
DEFAULT_VARIANCE_FLOOR = 1e-10
DEFAULT_EXTRINSIC_CAP = 1e6

Form = Literal["auto", "k_side", "m_side"]


@dataclass(frozen=True)
class GaussianMessageVector:
    """Per-symbol means and variances.

    ``clamped`` marks extrinsic entries whose variance was capped because the
    posterior was no sharper than the prior.
    """

    means: np.ndarray
    variances: np.ndarray
    clamped: np.ndarray | None = None

    def __post_init__(self):
        if np.shape(self.means) != np.shape(self.variances):
            raise ConfigError(
                f"means {np.shape(self.means)} and variances {np.shape(self.variances)} differ",
                field="variances",
            )
        if np.any(np.asarray(self.variances) <= 0):
            raise ConfigError("variances must be > 0", field="variances")

    @classmethod
    def uninformative(cls, K: int, T: int | None = None) -> "GaussianMessageVector":
        shape = (K,) if T is None else (K, T)
        return cls(np.zeros(shape), np.ones(shape))

    @property
    def n_clamped(self) -> int:
        return 0 if self.clamped is None else int(np.count_nonzero(self.clamped))


def preferred_form(K: int, M: int) -> Literal["k_side", "m_side"]:
    """Cheaper inversion: K-side costs MK^2 + K^3, M-side KM^2 + M^3."""
    return "k_side" if M * K**2 + K**3 <= K * M**2 + M**3 else "m_side"


def _inverse_factor(A: np.ndarray) -> np.ndarray:
    """Inverse of the Cholesky factor of a batch of SPD matrices."""
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as e:
        logger.error("LMMSE normal matrix is not symmetric positive definite")
        raise NumericalError("normal matrix is not SPD", str(e)) from e
    return np.linalg.inv(L)


def lmmse_posterior(
    Y: np.ndarray,
    H: np.ndarray,
    sigma_n: float,
    prior: GaussianMessageVector,
    form: Form = "auto",
) -> GaussianMessageVector:
    """Posterior means and variances of the LMMSE estimate.

    Uses ``(H^T H / sigma^2 + V^-1)^-1`` (K-side) or the equivalent
    ``V - V H^T (sigma^2 I + H V H^T)^-1 H V`` (M-side).
    """
    if sigma_n <= 0:
        raise ConfigError(f"must be > 0, got {sigma_n}", field="sigma_n")
    Y = np.asarray(Y, dtype=np.float64)
    H = np.asarray(H, dtype=np.float64)
    single = Y.ndim == 1
    Yb = Y[:, None] if single else Y
    xbar = np.asarray(prior.means, dtype=np.float64)
    vbar = np.asarray(prior.variances, dtype=np.float64)
    xbar = xbar[:, None] if xbar.ndim == 1 else xbar
    vbar = vbar[:, None] if vbar.ndim == 1 else vbar

    M, T = Yb.shape
    K = H.shape[-1]
    if H.shape[-2] != M or xbar.shape != (K, T):
        raise ConfigError(
            f"shapes disagree: Y {Y.shape}, H {H.shape}, prior {np.shape(prior.means)}", field="H"
        )
    Hb = np.broadcast_to(H, (T, M, K)) if H.ndim == 2 else H
    if Hb.shape[0] != T:
        raise ConfigError(f"H has {Hb.shape[0]} slots but Y has {T}", field="H")

    # slot-major views: (T, K) and (T, M)
    xs, vs, ys = xbar.T, vbar.T, Yb.T
    noise = sigma_n**2
    chosen = preferred_form(K, M) if form == "auto" else form

    if chosen == "k_side":
        A = np.einsum("tmk,tml->tkl", Hb, Hb) / noise
        A[:, np.arange(K), np.arange(K)] += 1.0 / vs
        Linv = _inverse_factor(A)
        b = xs / vs + np.einsum("tmk,tm->tk", Hb, ys) / noise
        var = np.einsum("tik,tik->tk", Linv, Linv)
        mean = np.einsum("tik,ti->tk", Linv, np.einsum("tij,tj->ti", Linv, b))
    elif chosen == "m_side":
        HV = Hb * vs[:, None, :]
        B = np.einsum("tmk,tnk->tmn", HV, Hb)
        B[:, np.arange(M), np.arange(M)] += noise
        Linv = _inverse_factor(B)
        G = np.einsum("tij,tjk->tik", Linv, Hb)
        var = vs - vs**2 * np.einsum("tik,tik->tk", G, G)
        resid = ys - np.einsum("tmk,tk->tm", Hb, xs)
        r = np.einsum("tim,ti->tm", Linv, np.einsum("tij,tj->ti", Linv, resid))
        mean = xs + vs * np.einsum("tmk,tm->tk", Hb, r)
    else:
        raise ConfigError(f"unknown form '{form}'", field="form")

    var = np.maximum(var, np.finfo(float).tiny)
    if single:
        return GaussianMessageVector(mean[0], var[0])
    return GaussianMessageVector(mean.T, var.T)


def extrinsic_extract(
    posterior: GaussianMessageVector,
    prior: GaussianMessageVector,
    cap: float = DEFAULT_EXTRINSIC_CAP,
) -> GaussianMessageVector:
    """Remove the prior from the posterior: v_e = (1/v_post - 1/v_prior)^-1."""
    xh, vh = np.asarray(posterior.means), np.asarray(posterior.variances)
    xb, vb = np.asarray(prior.means), np.asarray(prior.variances)
    precision = 1.0 / vh - 1.0 / vb
    clamped = precision <= 1.0 / cap
    safe = np.where(clamped, 1.0, precision)
    ve = np.where(clamped, cap, 1.0 / safe)
    xe = np.where(clamped, 0.0, ve * (xh / vh - xb / vb))
    if clamped.any():
        logger.warning(
            f"Extrinsic variance capped at {cap:g} for {int(clamped.sum())} symbol(s): "
            "posterior no sharper than prior"
        )
    return GaussianMessageVector(xe, ve, clamped)


def llr_from_extrinsic(extrinsic: GaussianMessageVector, clip: float = DEFAULT_LLR_CLIP) -> np.ndarray:
    """Decoder input LLRs 2 x_e / v_e, clipped to +-clip."""
    llr = 2.0 * np.asarray(extrinsic.means) / np.asarray(extrinsic.variances)
    return np.clip(llr, -clip, clip)


def prior_from_decoder(llrs: np.ndarray, floor: float = DEFAULT_VARIANCE_FLOOR) -> GaussianMessageVector:
    """Soft symbols from decoder LLRs: mean tanh(L/2), variance 1 - mean^2."""
    llrs = np.asarray(llrs, dtype=np.float64)
    if not np.all(np.isfinite(llrs)):
        raise NumericalError("non-finite decoder LLR fed to the detector")
    mean = np.tanh(llrs / 2.0)
    return GaussianMessageVector(mean, np.maximum(1.0 - mean**2, floor))


def soft_detect(
    Y: np.ndarray,
    H: np.ndarray,
    sigma_n: float,
    prior: GaussianMessageVector,
    *,
    llr_clip: float = DEFAULT_LLR_CLIP,
    cap: float = DEFAULT_EXTRINSIC_CAP,
) -> tuple[np.ndarray, GaussianMessageVector]:
    """One detector pass: posterior, extrinsic, and the LLRs for the decoders."""
    posterior = lmmse_posterior(Y, H, sigma_n, prior)
    extrinsic = extrinsic_extract(posterior, prior, cap=cap)
    return llr_from_extrinsic(extrinsic, clip=llr_clip), extrinsic

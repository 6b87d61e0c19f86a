"""
MU-IRA code construction, encoding and the per-activation decoder.

Graph layout
------------
Info bit ``n`` owns ``degrees[n]`` consecutive sockets. The edge interleaver
puts socket ``edge_perm[s]`` at interleaved position ``s``; check ``j`` XORs
the interleaved positions ``j*alpha .. j*alpha + alpha - 1`` into ``c_j`` and
the accumulator emits ``p_j = p_{j-1} XOR c_j`` with ``p_{-1} = 0``.

A codeword is the repetition part (copy ``r`` of bit ``n`` at ``r*N + n``)
followed by the ``E/alpha`` parity bits. User ``k`` transmits
``codeword[user_perms[k]]``. All users of one instance share the graph and
differ only in their user interleaver.

Decoder messages live in interleaved-edge order and are batched over users,
so every array carries a leading user axis.
"""

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from muira.exceptions import CodeConstructionError, ConfigError, NumericalError
from muira.models import CodeParams, DegreeDistribution

logger = logging.getLogger(__name__)

DEFAULT_LLR_CLIP = 50.0


def code_rate(params: CodeParams) -> float:
    """R = alpha*S / (alpha*q*S + 1) with S = sum lambda_i / i."""
    return params.rate


# ============================================================================
# Construction
# ============================================================================


def quantize_degrees(lam: DegreeDistribution, info_len: int, alpha: int) -> dict[int, int]:
    """Number of info bits per degree, summing to ``info_len`` with alpha | E.

    Largest-remainder rounding of the node-perspective distribution, then at
    most two single-node moves between degree classes to make the edge count
    divisible by ``alpha``.
    """
    degrees = lam.degrees
    targets = [info_len * f for f in lam.node_fractions()]
    counts = [int(np.floor(t)) for t in targets]
    short = info_len - sum(counts)
    by_remainder = sorted(range(len(degrees)), key=lambda i: targets[i] - counts[i], reverse=True)
    for i in by_remainder[:short]:
        counts[i] += 1

    empty = [d for d, c in zip(degrees, counts, strict=True) if c == 0]
    if empty:
        raise CodeConstructionError(
            "degree quantization left classes without bits",
            f"degrees {empty} get 0 of {info_len} bits",
        )

    n_edges = sum(d * c for d, c in zip(degrees, counts, strict=True))
    if n_edges % alpha:
        counts = _repair_divisibility(degrees, counts, targets, n_edges, alpha)

    return dict(zip(degrees, counts, strict=True))


def _repair_divisibility(
    degrees: list[int], counts: list[int], targets: list[float], n_edges: int, alpha: int
) -> list[int]:
    """Move one or two bits between classes so that alpha divides E."""
    idx = range(len(degrees))

    def cost(new_counts):
        return sum(abs(c - t) for c, t in zip(new_counts, targets, strict=True))

    best = None
    for a in idx:
        for b in idx:
            if a == b or counts[a] < 2:
                continue
            if (n_edges - degrees[a] + degrees[b]) % alpha == 0:
                trial = list(counts)
                trial[a] -= 1
                trial[b] += 1
                if best is None or cost(trial) < cost(best):
                    best = trial
    if best is not None:
        return best

    for a1 in idx:
        for b1 in idx:
            for a2 in idx:
                for b2 in idx:
                    if a1 == b1 or a2 == b2:
                        continue
                    trial = list(counts)
                    trial[a1] -= 1
                    trial[b1] += 1
                    trial[a2] -= 1
                    trial[b2] += 1
                    if min(trial) < 1:
                        continue
                    delta = degrees[b1] - degrees[a1] + degrees[b2] - degrees[a2]
                    if (n_edges + delta) % alpha == 0 and (best is None or cost(trial) < cost(best)):
                        best = trial
    if best is None:
        raise CodeConstructionError(
            "cannot make the edge count divisible by alpha",
            f"E={n_edges}, alpha={alpha}, degrees={degrees}",
        )
    return best


@dataclass(frozen=True)
class CodeInstance:
    """A concrete MU-IRA code: degree assignment, interleavers and lengths."""

    q: int
    alpha: int
    degrees: np.ndarray
    edge_perm: np.ndarray
    user_perms: np.ndarray
    params: CodeParams | None = None
    # derived
    socket_owner: np.ndarray = field(init=False, repr=False)
    socket_offsets: np.ndarray = field(init=False, repr=False)
    edge_bit: np.ndarray = field(init=False, repr=False)
    edge_inverse: np.ndarray = field(init=False, repr=False)
    user_inverse: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        degrees = self.degrees
        socket_owner = np.repeat(np.arange(degrees.size), degrees)
        offsets = np.concatenate([[0], np.cumsum(degrees)[:-1]])
        object.__setattr__(self, "socket_owner", socket_owner)
        object.__setattr__(self, "socket_offsets", offsets)
        object.__setattr__(self, "edge_bit", socket_owner[self.edge_perm])
        object.__setattr__(self, "edge_inverse", np.argsort(self.edge_perm))
        object.__setattr__(self, "user_inverse", np.argsort(self.user_perms, axis=1))

    @property
    def info_len(self) -> int:
        return int(self.degrees.size)

    @property
    def n_edges(self) -> int:
        return int(self.degrees.sum())

    @property
    def rep_len(self) -> int:
        return self.q * self.info_len

    @property
    def parity_len(self) -> int:
        return self.n_edges // self.alpha

    @property
    def codeword_len(self) -> int:
        return self.rep_len + self.parity_len

    @property
    def n_users(self) -> int:
        return int(self.user_perms.shape[0])

    @property
    def measured_rate(self) -> float:
        return self.info_len / self.codeword_len

    @property
    def rep_fraction(self) -> float:
        return self.rep_len / self.codeword_len

    @property
    def signs(self) -> np.ndarray:
        """Modulation sign per codeword position (G_rep on copies, +1 on parity)."""
        pattern = np.array([1.0 if r % 2 == 0 else -1.0 for r in range(self.q)])
        return np.concatenate([np.repeat(pattern, self.info_len), np.ones(self.parity_len)])


def build_code_from_degrees(
    degrees,
    q: int,
    alpha: int,
    seed,
    *,
    n_users: int = 1,
    params: CodeParams | None = None,
    edge_perm=None,
    user_perms=None,
) -> CodeInstance:
    """Build an instance from an explicit per-bit degree list.

    Degrees of 1 are allowed, which gives cycle-free graphs for small
    reference codes. Interleavers not passed in are drawn from ``seed``:
    the edge interleaver first, then one user interleaver per user.
    """
    degrees = np.asarray(degrees, dtype=np.int64)
    if degrees.ndim != 1 or degrees.size == 0:
        raise ConfigError("need a non-empty 1-D degree list", field="degrees")
    if np.any(degrees < 1):
        raise ConfigError("info-bit degrees must be >= 1", field="degrees")
    if q < 1 or alpha < 1:
        raise ConfigError("q and alpha must be >= 1", field="q" if q < 1 else "alpha")
    n_edges = int(degrees.sum())
    if n_edges % alpha:
        raise CodeConstructionError("edge count not divisible by alpha", f"E={n_edges}, alpha={alpha}")

    rng = np.random.default_rng(seed)
    if edge_perm is None:
        edge_perm = rng.permutation(n_edges)
    edge_perm = np.asarray(edge_perm, dtype=np.int64)
    if sorted(edge_perm.tolist()) != list(range(n_edges)):
        raise ConfigError(f"not a permutation of {n_edges} sockets", field="edge_perm")

    n = q * degrees.size + n_edges // alpha
    if user_perms is None:
        user_perms = np.stack([rng.permutation(n) for _ in range(n_users)])
    user_perms = np.atleast_2d(np.asarray(user_perms, dtype=np.int64))
    if user_perms.shape[1] != n or np.any(np.sort(user_perms, axis=1) != np.arange(n)):
        raise ConfigError(f"user interleavers must permute {n} positions", field="user_perms")

    return CodeInstance(
        q=q,
        alpha=alpha,
        degrees=degrees,
        edge_perm=edge_perm,
        user_perms=user_perms,
        params=params,
    )


def build_code(params: CodeParams, info_len: int, seed, *, n_users: int = 1) -> CodeInstance:
    """Quantize lambda onto ``info_len`` bits and draw seeded interleavers."""
    if info_len < 1:
        raise ConfigError(f"must be >= 1, got {info_len}", field="info_len")
    counts = quantize_degrees(params.lambda_, info_len, params.alpha)
    degrees = np.repeat(list(counts.keys()), list(counts.values()))
    instance = build_code_from_degrees(
        degrees, params.q, params.alpha, seed, n_users=n_users, params=params
    )
    logger.debug(
        f"Built MU-IRA code: N={instance.info_len}, E={instance.n_edges}, "
        f"n={instance.codeword_len}, measured R={instance.measured_rate:.4f} "
        f"(nominal {params.rate:.4f})"
    )
    return instance


# ============================================================================
# Encoding
# ============================================================================


def _check_bits(instance: CodeInstance, info_bits) -> np.ndarray:
    bits = np.asarray(info_bits, dtype=np.int8)
    if bits.shape[-1] != instance.info_len:
        raise ConfigError(
            f"expected {instance.info_len} info bits, got {bits.shape[-1]}", field="info_bits"
        )
    return bits


def combiner_bits(instance: CodeInstance, info_bits) -> np.ndarray:
    """c_j: XOR of the alpha interleaved edge copies feeding check j."""
    bits = _check_bits(instance, info_bits)
    edges = bits[..., instance.edge_bit]
    grouped = edges.reshape(*edges.shape[:-1], instance.parity_len, instance.alpha)
    return (grouped.sum(axis=-1) % 2).astype(np.int8)


def encode(instance: CodeInstance, info_bits) -> np.ndarray:
    """Codeword bits (repetition part followed by parity part), before pi_k.

    Works on a single word of shape ``(N,)`` or a batch of shape ``(..., N)``.
    """
    bits = _check_bits(instance, info_bits)
    rep = np.concatenate([bits] * instance.q, axis=-1)
    parity = (np.cumsum(combiner_bits(instance, bits), axis=-1) % 2).astype(np.int8)
    return np.concatenate([rep, parity], axis=-1)


def interleave(instance: CodeInstance, words: np.ndarray) -> np.ndarray:
    """Apply pi_k row-wise: row k of ``words`` belongs to user k."""
    return np.take_along_axis(np.asarray(words), instance.user_perms[: len(words)], axis=1)


def deinterleave(instance: CodeInstance, words: np.ndarray) -> np.ndarray:
    """Inverse of :func:`interleave`."""
    return np.take_along_axis(np.asarray(words), instance.user_inverse[: len(words)], axis=1)


def modulate(instance: CodeInstance, info_bits: np.ndarray) -> np.ndarray:
    """K x n BPSK symbols: encode, apply G_rep, then each user's pi_k."""
    codewords = encode(instance, np.atleast_2d(info_bits))
    symbols = (1.0 - 2.0 * codewords) * instance.signs
    return interleave(instance, symbols)


def to_codeword_order(instance: CodeInstance, symbol_llrs: np.ndarray) -> np.ndarray:
    """Symbol LLRs in transmit order to bit LLRs in codeword order."""
    return deinterleave(instance, symbol_llrs) * instance.signs


def to_symbol_order(instance: CodeInstance, bit_llrs: np.ndarray) -> np.ndarray:
    """Bit LLRs in codeword order to symbol LLRs in transmit order."""
    return interleave(instance, bit_llrs * instance.signs)


# ============================================================================
# Decoding
# ============================================================================


@dataclass
class DecoderState:
    """Per-frame message memory for all users of one instance.

    Shapes: ``m_cv``/``m_vc`` are ``(K, E)`` in interleaved-edge order,
    ``rep_llr`` is ``(K, q, N)``, ``par_llr`` and ``par_ext`` are ``(K, P)``
    and ``total`` is ``(K, N)``.
    """

    instance: CodeInstance
    m_cv: np.ndarray
    m_vc: np.ndarray
    rep_llr: np.ndarray
    par_llr: np.ndarray
    par_ext: np.ndarray
    total: np.ndarray
    llr_clip: float = DEFAULT_LLR_CLIP
    activations: int = 0

    @classmethod
    def fresh(
        cls, instance: CodeInstance, n_users: int | None = None, llr_clip: float = DEFAULT_LLR_CLIP
    ) -> "DecoderState":
        K = instance.n_users if n_users is None else n_users
        E, N, P = instance.n_edges, instance.info_len, instance.parity_len
        return cls(
            instance=instance,
            m_cv=np.zeros((K, E)),
            m_vc=np.zeros((K, E)),
            rep_llr=np.zeros((K, instance.q, N)),
            par_llr=np.zeros((K, P)),
            par_ext=np.zeros((K, P)),
            total=np.zeros((K, N)),
            llr_clip=llr_clip,
        )

    @property
    def n_users(self) -> int:
        return int(self.total.shape[0])

    @property
    def parity_total(self) -> np.ndarray:
        return self.par_llr + self.par_ext


def _two_atanh(x: np.ndarray, clip: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        out = np.log1p(x) - np.log1p(-x)
    return np.clip(out, -clip, clip)


def _log_matmul(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Product of batched 2x2 matrices in the (logaddexp, +) semiring."""
    return np.logaddexp(
        A[..., :, 0, None] + B[..., None, 0, :],
        A[..., :, 1, None] + B[..., None, 1, :],
    )


def _log_scan(mats: np.ndarray, reverse: bool = False) -> np.ndarray:
    """Inclusive prefix (or suffix) products along axis -3.

    Prefix entry j is ``M_0 x ... x M_j``; with ``reverse`` entry j is
    ``M_j x ... x M_{P-1}``.
    """
    out = mats[..., ::-1, :, :].copy() if reverse else mats.copy()
    P = out.shape[-3]
    shift = 1
    while shift < P:
        earlier, later = out[..., :-shift, :, :], out[..., shift:, :, :]
        out[..., shift:, :, :] = _log_matmul(later, earlier) if reverse else _log_matmul(earlier, later)
        shift *= 2
    return out[..., ::-1, :, :] if reverse else out


def _accumulator(T: np.ndarray, Lpar: np.ndarray, clip: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact forward-backward on the accumulator chain.

    Given the check LLRs ``T`` (K, P) and parity channel LLRs ``Lpar``,
    returns the extrinsic LLR of every c_j and of every p_j.
    """
    K, P = T.shape
    sgn = np.array([1.0, -1.0])
    # M_j[a, b]: state a -> b, c_j = a xor b, p_j = b
    mats = (
        (sgn[[[0, 1], [1, 0]]] * T[..., None, None]) / 2.0
        + (sgn[None, :] * Lpar[..., None, None]) / 2.0
    )
    prefix = _log_scan(mats)
    suffix = _log_scan(mats, reverse=True)

    alpha_ = prefix[..., 0, :]  # (K, P, 2) forward metric after step j
    beta_ = np.zeros((K, P, 2))
    beta_[:, :-1, :] = np.logaddexp(suffix[:, 1:, :, 0], suffix[:, 1:, :, 1])

    par_ext = (alpha_[..., 0] + beta_[..., 0]) - (alpha_[..., 1] + beta_[..., 1]) - Lpar

    alpha_prev = np.empty((K, P, 2))
    alpha_prev[:, 0, :] = [0.0, -np.inf]
    alpha_prev[:, 1:, :] = alpha_[:, :-1, :]
    half = Lpar / 2.0
    end0 = half + beta_[..., 0]
    end1 = -half + beta_[..., 1]
    c_zero = np.logaddexp(alpha_prev[..., 0] + end0, alpha_prev[..., 1] + end1)
    c_one = np.logaddexp(alpha_prev[..., 0] + end1, alpha_prev[..., 1] + end0)
    c_ext = c_zero - c_one

    return np.clip(c_ext, -clip, clip), np.clip(par_ext, -clip, clip)


def _ira_pass(state: DecoderState) -> None:
    """One sum-product sweep of the combiner checks and the accumulator."""
    inst = state.instance
    K = state.n_users
    t = np.tanh(state.m_vc.reshape(K, inst.parity_len, inst.alpha) / 2.0)

    T = _two_atanh(np.prod(t, axis=-1), state.llr_clip)
    c_ext, state.par_ext = _accumulator(T, state.par_llr, state.llr_clip)

    ones = np.ones((K, inst.parity_len, 1))
    before = np.cumprod(np.concatenate([ones, t[..., :-1]], axis=-1), axis=-1)
    after = np.cumprod(np.concatenate([ones, t[..., :0:-1]], axis=-1), axis=-1)[..., ::-1]
    leave_one_out = before * after * np.tanh(c_ext / 2.0)[..., None]
    state.m_cv = _two_atanh(leave_one_out, state.llr_clip).reshape(K, inst.n_edges)


def _combine(state: DecoderState) -> None:
    """Information combiner: totals per info bit and messages back to the checks."""
    inst = state.instance
    socket_msgs = state.m_cv[:, inst.edge_inverse]
    from_checks = np.add.reduceat(socket_msgs, inst.socket_offsets, axis=1)
    state.total = state.rep_llr.sum(axis=1) + from_checks
    m_vc_sockets = state.total[:, inst.socket_owner] - socket_msgs
    state.m_vc = np.clip(m_vc_sockets[:, inst.edge_perm], -state.llr_clip, state.llr_clip)


def _check_finite(state: DecoderState, *arrays: tuple[str, np.ndarray]) -> None:
    for name, arr in arrays:
        bad = ~np.isfinite(arr)
        if bad.any():
            user, pos = (int(i) for i in np.argwhere(bad)[0][:2])
            logger.error(f"Non-finite decoder message in {name} (user {user}, index {pos})")
            raise NumericalError(
                "non-finite decoder message",
                f"{name}[user={user}, index={pos}] after {state.activations} activation(s)",
            )


def decode_activation(state: DecoderState, channel_llrs: np.ndarray) -> np.ndarray:
    """Run one decoder activation and return extrinsic LLRs per codeword bit.

    ``channel_llrs`` holds one row per user in codeword order (see
    :func:`to_codeword_order`). The schedule is: fold the new channel values
    into the combiner, IRA pass, combiner update, second IRA pass, then emit
    the repetition-copy and parity extrinsics.
    """
    inst = state.instance
    llrs = np.atleast_2d(np.asarray(channel_llrs, dtype=np.float64))
    if llrs.shape != (state.n_users, inst.codeword_len):
        raise ConfigError(
            f"expected shape {(state.n_users, inst.codeword_len)}, got {llrs.shape}",
            field="channel_llrs",
        )
    _check_finite(state, ("channel_llrs", llrs))
    llrs = np.clip(llrs, -state.llr_clip, state.llr_clip)
    state.rep_llr = llrs[:, : inst.rep_len].reshape(state.n_users, inst.q, inst.info_len)
    state.par_llr = llrs[:, inst.rep_len :]

    _combine(state)
    _ira_pass(state)
    _combine(state)
    _ira_pass(state)
    _combine(state)
    state.activations += 1

    rep_ext = state.total[:, None, :] - state.rep_llr
    out = np.concatenate(
        [rep_ext.reshape(state.n_users, inst.rep_len), state.par_ext], axis=1
    )
    out = np.clip(out, -state.llr_clip, state.llr_clip)
    _check_finite(state, ("m_cv", state.m_cv), ("extrinsic", out))
    return out


def hard_decision(state: DecoderState) -> np.ndarray:
    """Info-bit estimates per user; a total LLR of exactly 0 decides 0."""
    return (state.total < 0).astype(np.int8)


def checks_satisfied(instance: CodeInstance, info_bits: np.ndarray, parity_bits: np.ndarray) -> np.ndarray:
    """Per-row flag: every combiner/accumulator check holds."""
    c = combiner_bits(instance, np.atleast_2d(info_bits))
    p = np.atleast_2d(parity_bits).astype(np.int8)
    prev = np.concatenate([np.zeros((p.shape[0], 1), dtype=np.int8), p[:, :-1]], axis=1)
    return np.all((p ^ prev) == c, axis=1)


def syndrome_ok(state: DecoderState) -> np.ndarray:
    """Early-stop test on the current hard decisions of info and parity bits."""
    parity = (state.parity_total < 0).astype(np.int8)
    return checks_satisfied(state.instance, hard_decision(state), parity)


# ============================================================================
# Complexity
# ============================================================================


class OperationCounts(NamedTuple):
    """Decoder work per information bit per iteration for all users."""

    additions: float
    multiplications: float
    exp_log: float


def operation_counts(params: CodeParams, K: int, rate: float | None = None) -> OperationCounts:
    """Operation counts of one global iteration; ``rate`` defaults to the code rate."""
    R = params.rate if rate is None else rate
    if R <= 0 or K < 1:
        raise ConfigError("rate must be > 0 and K >= 1", field="rate" if R <= 0 else "K")
    parity_per_bit = 1.0 / R - params.q
    additions = (2.0 / R + parity_per_bit * (5 + 6 * params.alpha) - 1.0) * K
    products = 6.0 * params.alpha * parity_per_bit * K
    return OperationCounts(additions, products, products)

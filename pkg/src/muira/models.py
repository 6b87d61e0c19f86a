"""
Pydantic models for code parameters, system dimensions and results.

Models give type safety, schema generation for the MCP tools, and strict
validation of config files (unknown keys are rejected).
"""

from typing import Literal

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_validator,
    model_validator,
)

DEGREE_SUM_TOLERANCE = 1e-9
DEFAULT_Q_MAX = 5


class StrictModel(BaseModel):
    """Base for every model read from user input."""

    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


# ============================================================================
# System and channel
# ============================================================================


class SystemDims(StrictModel):
    """Number of single-antenna users and base-station antennas."""

    K: int = Field(ge=1, description="Number of users")
    M: int = Field(ge=1, description="Number of receive antennas")

    @computed_field(description="System load K/M")
    @property
    def beta(self) -> float:
        return self.K / self.M


class CsiModel(StrictModel):
    """Additive Gaussian channel-estimation error model."""

    error_variance: float = Field(
        default=0.0,
        ge=0.0,
        description="Variance of the per-entry estimation error (0 = perfect CSI)",
    )

    @property
    def perfect(self) -> bool:
        return self.error_variance == 0.0


# ============================================================================
# Code parameters
# ============================================================================


class DegreeDistribution(StrictModel):
    """Edge-perspective information degree distribution lambda(x).

    Accepts either a list of ``(degree, fraction)`` pairs or a mapping
    ``{degree: fraction}``; entries are sorted by degree.
    """

    entries: tuple[tuple[int, float], ...] = Field(
        description="(degree, edge fraction) pairs with strictly increasing degrees"
    )

    @model_validator(mode="before")
    @classmethod
    def _accept_mapping(cls, data):
        if isinstance(data, dict) and "entries" not in data:
            data = {"entries": data}
        if isinstance(data, dict) and isinstance(data["entries"], dict):
            data = dict(data)
            data["entries"] = sorted(
                (int(d), float(f)) for d, f in data["entries"].items()
            )
        elif isinstance(data, list | tuple):
            data = {"entries": sorted((int(d), float(f)) for d, f in data)}
        return data

    @field_validator("entries")
    @classmethod
    def _check_entries(cls, entries):
        if not entries:
            raise ValueError("degree distribution needs at least one entry")
        degrees = [d for d, _ in entries]
        if any(d < 2 for d in degrees):
            raise ValueError(f"degrees must be >= 2, got {degrees}")
        if any(b <= a for a, b in zip(degrees, degrees[1:], strict=False)):
            raise ValueError(f"degrees must be strictly increasing, got {degrees}")
        if any(not 0.0 < f <= 1.0 for _, f in entries):
            raise ValueError("edge fractions must lie in (0, 1]")
        total = sum(f for _, f in entries)
        if abs(total - 1.0) > DEGREE_SUM_TOLERANCE:
            raise ValueError(f"edge fractions must sum to 1, got {total:.12f}")
        return entries

    @classmethod
    def normalized(cls, fractions: dict[int, float]) -> "DegreeDistribution":
        """Build from fractions that only approximately sum to one."""
        kept = {int(d): float(f) for d, f in fractions.items() if f > 0.0}
        total = sum(kept.values())
        return cls(entries=sorted((d, f / total) for d, f in kept.items()))

    @property
    def degrees(self) -> list[int]:
        return [d for d, _ in self.entries]

    @property
    def fractions(self) -> list[float]:
        return [f for _, f in self.entries]

    @property
    def inverse_degree_sum(self) -> float:
        """Sum of lambda_i / i, i.e. information bits per edge."""
        return sum(f / d for d, f in self.entries)

    def node_fractions(self) -> list[float]:
        """Node-perspective fractions (lambda_i / i) / sum_j (lambda_j / j)."""
        s = self.inverse_degree_sum
        return [(f / d) / s for d, f in self.entries]

    def as_dict(self) -> dict[str, float]:
        return {str(d): f for d, f in self.entries}


class CodeParams(StrictModel):
    """Parameters of the MU-IRA code family.

    SU-IRA codes are the ``q = 1`` instances and MAC-IRA codes the
    ``alpha = 1`` instances.
    """

    q: int = Field(ge=1, description="Repetition number")
    alpha: int = Field(ge=1, description="Combiner size (edges XORed per check)")
    lambda_: DegreeDistribution = Field(
        alias="lambda", description="Edge-perspective degree distribution"
    )
    q_max: int = Field(
        default=DEFAULT_Q_MAX, ge=1, description="Largest admissible repetition number"
    )

    @model_validator(mode="after")
    def _check_q(self):
        if self.q > self.q_max:
            raise ValueError(f"q={self.q} exceeds q_max={self.q_max}")
        return self

    @computed_field(description="Code rate alpha*S / (alpha*q*S + 1), S = sum lambda_i/i")
    @property
    def rate(self) -> float:
        s = self.lambda_.inverse_degree_sum
        return (self.alpha * s) / (self.alpha * self.q * s + 1.0)

    @computed_field(description="Sign applied to each repetition copy (+1, -1, +1, ...)")
    @property
    def rep_pattern(self) -> tuple[int, ...]:
        return tuple(1 if r % 2 == 0 else -1 for r in range(self.q))

    def to_config(self) -> dict:
        """Serializable form that round-trips through the config loader."""
        return {"q": self.q, "alpha": self.alpha, "lambda": self.lambda_.as_dict()}


# ============================================================================
# EXIT analysis results
# ============================================================================


class ExitState(BaseModel):
    """One iterate of the asymptotic EXIT recursion."""

    iteration: int = Field(ge=0, description="Iteration index (1-based for recorded steps)")
    v: float = Field(description="A-priori variance fed to the detector")
    v_e: float = Field(description="Detector extrinsic variance")
    I_a: float = Field(ge=0.0, le=1.0, description="Decoder a-priori mutual information")
    I_e: float = Field(ge=0.0, le=1.0, description="Decoder extrinsic mutual information")
    m_a: float = Field(ge=0.0, description="Mean of the decoder input LLR (2/v_e)")
    m_e: float = Field(ge=0.0, description="Mean of the decoder output LLR")


Verdict = Literal["converged", "stalled", "undetermined"]


class ExitTrajectory(BaseModel):
    """Recorded run of the EXIT recursion with its verdict."""

    states: list[ExitState] = Field(default_factory=list)
    verdict: Verdict = Field(description="converged, stalled (fixed point) or undetermined")
    iterations_used: int = Field(ge=0)
    sigma_n: float = Field(gt=0.0)
    K: int = Field(ge=1)
    M: int = Field(ge=1)

    @computed_field
    @property
    def converged(self) -> bool:
        return self.verdict == "converged"


ExitModelName = Literal["monte_carlo", "analytic"]


class ExitCurve(BaseModel):
    """Decoder transfer function sampled on an a-priori information grid."""

    I_a: list[float] = Field(description="A-priori mutual information grid (ascending)")
    I_e: list[float] = Field(description="Output information over all transmitted bits")
    I_rep: list[float] = Field(description="Output information of repetition-copy bits")
    I_par: list[float] = Field(description="Output information of parity bits")
    rep_fraction: float = Field(ge=0.0, le=1.0, description="Share of repetition bits in a codeword")
    model: ExitModelName = Field(description="How the curve was obtained")
    monotone_violations: int = Field(
        default=0, ge=0, description="Grid steps where I_e decreased (Monte-Carlo noise)"
    )

    @model_validator(mode="after")
    def _check_lengths(self):
        n = len(self.I_a)
        if n < 2 or any(len(x) != n for x in (self.I_e, self.I_rep, self.I_par)):
            raise ValueError("curve arrays must share a length of at least 2")
        return self

    @property
    def par_fraction(self) -> float:
        return 1.0 - self.rep_fraction


class ThresholdReport(BaseModel):
    """Result of the decoding-threshold bisection."""

    threshold_db: float = Field(description="Smallest E_b/N_0 (dB) that converges")
    sigma_n: float = Field(gt=0.0, description="Noise standard deviation at the threshold")
    rate: float = Field(gt=0.0)
    K: int = Field(ge=1)
    M: int = Field(ge=1)
    resolution_db: float = Field(gt=0.0)
    monotone: bool = Field(
        default=True, description="False when the window showed several boundaries"
    )
    candidates_db: list[float] = Field(
        default_factory=list, description="All converged/not-converged boundaries seen"
    )
    refined: bool = Field(
        default=False, description="True when the curve was re-sampled over the operating range"
    )


class CapacityReport(BaseModel):
    """E_b/N_0 at which the sum capacity equals the sum rate."""

    limit_db: float
    sigma_n: float = Field(gt=0.0)
    rate: float = Field(gt=0.0)
    K: int = Field(ge=1)
    M: int = Field(ge=1)
    input: Literal["gaussian", "bpsk"] = "gaussian"
    samples: int = Field(ge=1)
    std_error_bits: float = Field(ge=0.0, description="MC standard error of the capacity")
    std_error_db: float = Field(ge=0.0, description="Standard error mapped to the dB limit")


# ============================================================================
# BER simulation results
# ============================================================================


class BerPoint(BaseModel):
    """Error statistics at one E_b/N_0 point."""

    ebn0_db: float
    sigma_n: float = Field(gt=0.0)
    tau_max: int = Field(ge=1)
    bits: int = Field(ge=0)
    errors: int = Field(ge=0)
    frames: int = Field(ge=0)
    frame_errors: int = Field(ge=0)
    ci_low: float = Field(ge=0.0, le=1.0)
    ci_high: float = Field(ge=0.0, le=1.0)
    mean_iterations: float = Field(ge=0.0)
    undetected_frames: int = Field(
        default=0, ge=0, description="Frames declared decoded but carrying bit errors"
    )
    declared_frames: int = Field(default=0, ge=0, description="Frames declared decoded")
    failed_frames: int = Field(
        default=0, ge=0, description="Frames aborted by a numerical failure (frame errors, no bits counted)"
    )
    user_errors: list[int] = Field(default_factory=list, description="Info-bit errors per user")

    @computed_field
    @property
    def ber(self) -> float:
        return self.errors / self.bits if self.bits else 0.0


class BerResult(BaseModel):
    """All points of one BER run plus the config that produced them."""

    points: list[BerPoint] = Field(default_factory=list)
    config: dict = Field(default_factory=dict, description="Echo of the SimConfig")


# ============================================================================
# Optimizer results
# ============================================================================


class CandidateRecord(BaseModel):
    """One evaluated (q, alpha, target rate) search step."""

    q: int
    alpha: int
    target_rate: float
    rate: float
    gap: float = Field(description="Minimum tunnel gap (mutual information units)")
    feasible: bool
    evaluations: int = Field(ge=0)


class OptimizationResult(BaseModel):
    """Best code found by the degree-distribution search."""

    params: CodeParams
    rate: float
    sum_rate: float
    feasible: bool
    gap: float
    design_sigma_n: float = Field(gt=0.0)
    design_ebn0_db: float
    verified_threshold_db: float | None = None
    log: list[CandidateRecord] = Field(default_factory=list)


class PresetInfo(BaseModel):
    """Built-in code with the design point it was published for."""

    name: str
    source: str = Field(description="Where the code comes from (e.g. 'MU-IRA, full loading')")
    params: CodeParams
    K: int | None = None
    M: int | None = None
    sigma_n: float | None = None
    nominal_rate: float
    reference_threshold_db: float | None = None
    reference_capacity_db: float | None = None

"""
Pydantic Models for MCP Tools

Structured output of the MCP tools that have no counterpart among the
toolkit result models in :mod:`muira.models`.
"""

from pydantic import BaseModel, Field

from muira.models import PresetInfo


class PresetSummary(BaseModel):
    """Short description of a built-in code for list views"""

    name: str = Field(description="Preset name accepted by every tool")
    source: str = Field(description="Where the code comes from")
    q: int = Field(description="Repetition number")
    alpha: int = Field(description="Combiner size")
    rate: float = Field(description="Code rate computed from the degree distribution")
    K: int | None = Field(default=None, description="Design number of users")
    M: int | None = Field(default=None, description="Design number of receive antennas")
    sigma_n: float | None = Field(default=None, description="Design noise standard deviation")

    @classmethod
    def from_preset(cls, preset: PresetInfo) -> "PresetSummary":
        return cls(
            name=preset.name,
            source=preset.source,
            q=preset.params.q,
            alpha=preset.params.alpha,
            rate=preset.params.rate,
            K=preset.K,
            M=preset.M,
            sigma_n=preset.sigma_n,
        )


class CodeRateResult(BaseModel):
    """Rate and per-user load of an MU-IRA code"""

    rate: float = Field(description="Code rate alpha*S / (alpha*q*S + 1)")
    inverse_degree_sum: float = Field(description="S = sum lambda_i / i")
    sum_rate: float | None = Field(default=None, description="K * rate when K is given")


class VarianceTransferResult(BaseModel):
    """Detector extrinsic variance for one prior variance"""

    v: float = Field(description="Prior variance fed to the detector")
    v_e: float = Field(description="Extrinsic variance (finite system)")
    v_e_asymptotic: float | None = Field(
        default=None, description="Large-system extrinsic variance (None outside its domain)"
    )
    mutual_info: float = Field(description="Decoder a-priori information J(2/sqrt(v_e))")

"""
Run configuration models and file loaders.

Config files are JSON or TOML documents whose top-level keys are the fields
of :class:`SimConfig`, :class:`ExitConfig` or :class:`OptimizerConfig`.
Unknown keys are rejected.
"""

import json
import logging
import re
import tomllib
from pathlib import Path
from typing import Literal

from pydantic import Field, ValidationError, field_validator, model_validator

from muira.exceptions import ConfigError
from muira.models import CodeParams, CsiModel, ExitModelName, StrictModel, SystemDims

logger = logging.getLogger(__name__)


class NumericsConfig(StrictModel):
    """Guards that keep message passing finite."""

    llr_clip: float = Field(default=50.0, gt=0.0, description="LLR magnitude clip")
    variance_floor: float = Field(default=1e-10, gt=0.0, description="Smallest prior variance")
    extrinsic_cap: float = Field(
        default=1e6, gt=0.0, description="Extrinsic variance used when v_post >= v_prior"
    )


class FadingSpec(StrictModel):
    """Fast fading (new matrix per symbol) or block fading of a given length.

    Accepts ``"fast"``, ``"block(200)"``, ``"block:200"`` or the mapping form.
    """

    kind: Literal["fast", "block"] = "fast"
    block_len: int | None = Field(default=None, ge=1, description="Symbols per block")

    @model_validator(mode="before")
    @classmethod
    def _parse_string(cls, data):
        if isinstance(data, str):
            text = data.strip().lower()
            if text == "fast":
                return {"kind": "fast"}
            match = re.fullmatch(r"block[(:]\s*(\d+)\s*\)?", text)
            if not match:
                raise ValueError(f"cannot parse fading spec '{data}'")
            return {"kind": "block", "block_len": int(match.group(1))}
        return data

    @model_validator(mode="after")
    def _check_block(self):
        if self.kind == "block" and self.block_len is None:
            raise ValueError("block fading needs block_len")
        return self

    @property
    def coherence_len(self) -> int:
        return 1 if self.kind == "fast" else int(self.block_len)

    def __str__(self) -> str:
        return "fast" if self.kind == "fast" else f"block({self.block_len})"


class StopRule(StrictModel):
    """When to stop simulating one E_b/N_0 point."""

    max_frames: int = Field(default=100, ge=1)
    max_bit_errors: int = Field(default=1000, ge=1)
    min_frames: int = Field(default=1, ge=1)


class ExitConfig(StrictModel):
    """Settings of the decoder EXIT measurement and the EXIT recursion."""

    exit_model: ExitModelName = "monte_carlo"
    grid_points: int = Field(default=41, ge=3, description="Size of the I_a grid")
    info_len: int = Field(default=10_000, ge=16, description="Info length of the measurement code")
    activations: int | None = Field(
        default=None, ge=1, description="Fixed activation count (None = run to fixed point)"
    )
    max_activations: int = Field(default=200, ge=1)
    activation_tol: float = Field(default=1e-5, gt=0.0)
    variance_samples: int = Field(default=100_000, ge=100, description="Samples of the fed-back variance estimate")
    eps_conv: float = Field(default=1e-4, gt=0.0)
    stall_tol: float = Field(default=1e-6, gt=0.0)
    stall_window: int = Field(default=5, ge=1)
    max_iters: int = Field(default=2000, ge=1)
    refine_points: int = Field(
        default=61, ge=0, description="Extra curve points near the threshold (0 = coarse grid only)"
    )
    seed: int = Field(default=2024, ge=0)


class SimConfig(StrictModel):
    """Description of one BER experiment."""

    dims: SystemDims
    code: CodeParams | str = Field(description="Code parameters or a preset name")
    info_len: int = Field(default=4096, ge=8)
    tau_max: int = Field(default=250, ge=1, description="Maximum global iterations")
    ebn0_grid: list[float] = Field(min_length=1, description="E_b/N_0 points in dB")
    fading: FadingSpec = Field(default_factory=FadingSpec)
    csi: CsiModel = Field(default_factory=CsiModel)
    stop: StopRule = Field(default_factory=StopRule)
    seed: int = Field(default=1, ge=0, description="Master seed")
    dynamic_load: bool = Field(
        default=False, description="Allow a preset to run at a K it was not designed for"
    )
    early_stop: bool = True
    workers: int = Field(default=1, ge=1)
    numerics: NumericsConfig = Field(default_factory=NumericsConfig)

    def to_config(self) -> dict:
        """Serializable form that round-trips through :func:`load_sim_config`."""
        code = self.code if isinstance(self.code, str) else self.code.to_config()
        return {
            "dims": {"K": self.dims.K, "M": self.dims.M},
            "code": code,
            "info_len": self.info_len,
            "tau_max": self.tau_max,
            "ebn0_grid": list(self.ebn0_grid),
            "fading": str(self.fading),
            "csi": {"error_variance": self.csi.error_variance},
            "stop": self.stop.model_dump(),
            "seed": self.seed,
            "dynamic_load": self.dynamic_load,
            "early_stop": self.early_stop,
            "workers": self.workers,
            "numerics": self.numerics.model_dump(),
        }


class OptimizerConfig(StrictModel):
    """Search space and budget of the degree-distribution optimizer."""

    K: int = Field(ge=1)
    M: int = Field(ge=1)
    sigma_n: float = Field(gt=0.0, description="Design noise standard deviation")
    degree_set: list[int] = Field(default_factory=lambda: [3, 10, 30, 50, 80, 100])
    alpha_range: list[int] = Field(default_factory=lambda: [1, 2, 3, 4, 5])
    q_max: int = Field(default=5, ge=1)
    popsize: int = Field(default=12, ge=4, description="Population multiplier per dimension")
    maxiter: int = Field(default=60, ge=1, description="Generations per inner search")
    rate_tolerance: float = Field(default=2e-3, gt=0.0, description="Rate bisection resolution")
    margin: float = Field(default=1e-3, ge=0.0, description="Required tunnel gap")
    exit_model: ExitModelName = "analytic"
    verify: bool = Field(default=True, description="Re-check the winner by threshold bisection")
    seed: int = Field(default=7, ge=0)
    exit: ExitConfig = Field(default_factory=lambda: ExitConfig(exit_model="analytic"))

    @field_validator("degree_set")
    @classmethod
    def _check_degrees(cls, degrees):
        if not degrees:
            raise ValueError("degree_set must not be empty")
        if any(d < 2 for d in degrees):
            raise ValueError("degrees must be >= 2")
        return sorted(set(degrees))

    @field_validator("alpha_range")
    @classmethod
    def _check_alphas(cls, alphas):
        if not alphas or any(a < 1 for a in alphas):
            raise ValueError("alpha_range must hold positive integers")
        return sorted(set(alphas))


def _read_document(path: Path) -> dict:
    """Parse a JSON or TOML file into a dict."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(text)
        else:
            data = json.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a table/object at top level")
    return data


def _validation_error(e: ValidationError) -> ConfigError:
    first = e.errors()[0]
    field = ".".join(str(p) for p in first["loc"]) or None
    return ConfigError(first["msg"], field=field)


def parse_sim_config(data: dict) -> SimConfig:
    """Validate a mapping into a :class:`SimConfig`."""
    try:
        return SimConfig.model_validate(data)
    except ValidationError as e:
        raise _validation_error(e) from e


def parse_optimizer_config(data: dict) -> OptimizerConfig:
    """Validate a mapping into an :class:`OptimizerConfig`."""
    try:
        return OptimizerConfig.model_validate(data)
    except ValidationError as e:
        raise _validation_error(e) from e


def load_sim_config(path: str | Path) -> SimConfig:
    path = Path(path)
    logger.debug(f"Loading simulation config from {path}")
    return parse_sim_config(_read_document(path))


def load_optimizer_config(path: str | Path) -> OptimizerConfig:
    path = Path(path)
    logger.debug(f"Loading optimizer config from {path}")
    return parse_optimizer_config(_read_document(path))


def load_document(path: str | Path) -> dict:
    """Raw mapping of a config file, for callers that merge CLI overrides."""
    return _read_document(Path(path))

"""Muira MCP Server

FastMCP server exposing the asymptotic analysis of MU-IRA coded MIMO-NOMA:
preset inventory, code rate, LMMSE variance transfer, EXIT trajectories,
decoding thresholds and capacity limits.

All tools return Pydantic models. Toolkit errors are raised to the client
as McpError subclasses with JSON-RPC error codes.
"""

import argparse
import logging
from collections.abc import Callable
from typing import Literal

from mcp.server import FastMCP
from pydantic import ValidationError

from muira.capacity import mimo_noma_capacity_limit
from muira.config import ExitConfig
from muira.exceptions import ConfigError, DomainError, MuiraError
from muira.exit_analysis import (
    CurveCache,
    decoding_threshold as compute_threshold,
    ebn0_to_sigma,
    get_exit_curve,
    lmmse_variance_transfer,
    lmmse_variance_transfer_asymptotic,
    run_exit_recursion,
    variance_to_mutual_info,
)
from muira.mcp.exceptions import ParameterValidationError, to_mcp_error
from muira.mcp.lifespan import curve_cache_lifespan
from muira.mcp.models import CodeRateResult, PresetSummary, VarianceTransferResult
from muira.mcp.resources import register_preset_resources
from muira.models import (
    CapacityReport,
    CodeParams,
    ExitTrajectory,
    SystemDims,
    ThresholdReport,
)
from muira.presets import list_presets as all_presets
from muira.presets import resolve_code

# Logs are written to stderr; stdout carries the stdio transport
logger = logging.getLogger(__name__)

mcp = FastMCP(
    name="muira-exit-analysis",
    lifespan=curve_cache_lifespan,
)

register_preset_resources(mcp)

# Module-level curve cache (set by lifespan, used by tools)
_cache: CurveCache | None = None


def _call[T](fn: Callable[..., T], *args, **kwargs) -> T:
    """Run a toolkit function, converting its errors for the client."""
    try:
        return fn(*args, **kwargs)
    except MuiraError as e:
        logger.warning(f"{fn.__name__} failed: {e.message}")
        raise to_mcp_error(e) from e


def _code(
    preset: str | None,
    q: int | None,
    alpha: int | None,
    degree_distribution: dict[int, float] | None,
) -> CodeParams:
    """Code from a preset name or from explicit (q, alpha, lambda)."""
    if preset:
        params, _ = _call(resolve_code, preset)
        return params
    if q is None or alpha is None or not degree_distribution:
        raise ParameterValidationError(
            "give a preset name or all of q, alpha and degree_distribution", field="preset"
        )
    try:
        return CodeParams.model_validate(
            {"q": q, "alpha": alpha, "lambda": degree_distribution, "q_max": max(q, 5)}
        )
    except ValidationError as e:
        first = e.errors()[0]
        raise ParameterValidationError(
            first["msg"], field=".".join(str(p) for p in first["loc"]) or None
        ) from e


def _dims(preset: str | None, K: int | None, M: int | None) -> tuple[int, int]:
    if preset and (K is None or M is None):
        _, info = _call(resolve_code, preset)
        K = K if K is not None else (info.K if info else None)
        M = M if M is not None else (info.M if info else None)
    if K is None or M is None or K < 1 or M < 1:
        raise ParameterValidationError("K and M must be positive integers", field="K")
    return K, M


def _exit_config(exit_model: str, grid_points: int) -> ExitConfig:
    try:
        return ExitConfig(exit_model=exit_model, grid_points=grid_points)
    except ValidationError as e:
        first = e.errors()[0]
        raise ParameterValidationError(first["msg"], field=str(first["loc"][0])) from e


# ============================================================================
# Tools
# ============================================================================


@mcp.tool()
def list_presets() -> list[PresetSummary]:
    """
    List the built-in MU-IRA, SU-IRA and MAC-IRA code presets.

    Returns:
        list[PresetSummary]: Name, (q, alpha), rate and design point per preset
    """
    return [PresetSummary.from_preset(p) for p in all_presets()]


@mcp.tool()
def code_rate(
    preset: str | None = None,
    q: int | None = None,
    alpha: int | None = None,
    degree_distribution: dict[int, float] | None = None,
    K: int | None = None,
) -> CodeRateResult:
    """
    Compute the rate of an MU-IRA code.

    Args:
        preset: Preset name (alternative to explicit parameters)
        q: Repetition number
        alpha: Combiner size
        degree_distribution: Edge-perspective fractions {degree: lambda}
        K: Number of users, to also report the sum rate

    Returns:
        CodeRateResult: Rate, S = sum lambda_i / i and optional sum rate
    """
    params = _code(preset, q, alpha, degree_distribution)
    return CodeRateResult(
        rate=params.rate,
        inverse_degree_sum=params.lambda_.inverse_degree_sum,
        sum_rate=K * params.rate if K else None,
    )


@mcp.tool()
def variance_transfer(v: float, K: int, M: int, sigma_n: float) -> VarianceTransferResult:
    """
    Evaluate the LMMSE detector variance transfer for i.i.d. Gaussian channels.

    Args:
        v: Prior variance of the transmitted symbols (0 < v <= 1)
        K: Number of users
        M: Number of receive antennas
        sigma_n: Noise standard deviation

    Returns:
        VarianceTransferResult: Extrinsic variance, its large-system limit
        (None where undefined) and the resulting decoder a-priori information
    """
    v_e = _call(lmmse_variance_transfer, v, K, M, sigma_n)
    try:
        asymptotic = lmmse_variance_transfer_asymptotic(v, K, M, sigma_n)
    except DomainError:
        asymptotic = None
    return VarianceTransferResult(
        v=v,
        v_e=v_e,
        v_e_asymptotic=asymptotic,
        mutual_info=float(variance_to_mutual_info(v_e)),
    )


@mcp.tool()
def exit_trajectory(
    sigma_n: float | None = None,
    ebn0_db: float | None = None,
    preset: str | None = None,
    q: int | None = None,
    alpha: int | None = None,
    degree_distribution: dict[int, float] | None = None,
    K: int | None = None,
    M: int | None = None,
    exit_model: Literal["monte_carlo", "analytic"] = "analytic",
    grid_points: int = 41,
) -> ExitTrajectory:
    """
    Run the detector/decoder EXIT recursion at one noise level.

    Args:
        sigma_n: Noise standard deviation (or give ebn0_db)
        ebn0_db: E_b/N_0 in dB, converted with the code rate
        preset: Preset name (alternative to explicit parameters)
        q: Repetition number
        alpha: Combiner size
        degree_distribution: Edge-perspective fractions {degree: lambda}
        K: Number of users (default: preset design)
        M: Number of receive antennas (default: preset design)
        exit_model: Decoder curve model, "analytic" (fast) or "monte_carlo"
        grid_points: Size of the a-priori information grid

    Returns:
        ExitTrajectory: Recorded iterates and the verdict
    """
    params = _code(preset, q, alpha, degree_distribution)
    K, M = _dims(preset, K, M)
    if sigma_n is None:
        if ebn0_db is None:
            raise ParameterValidationError("give sigma_n or ebn0_db", field="sigma_n")
        sigma_n = _call(ebn0_to_sigma, ebn0_db, params.rate)
    config = _exit_config(exit_model, grid_points)
    curve = _call(get_exit_curve, params, config, _cache)
    return _call(run_exit_recursion, curve, K, M, sigma_n, config)


@mcp.tool()
def decoding_threshold(
    preset: str | None = None,
    q: int | None = None,
    alpha: int | None = None,
    degree_distribution: dict[int, float] | None = None,
    K: int | None = None,
    M: int | None = None,
    low_db: float = -15.0,
    high_db: float = 10.0,
    resolution_db: float = 0.01,
    exit_model: Literal["monte_carlo", "analytic"] = "analytic",
    grid_points: int = 41,
) -> ThresholdReport:
    """
    Find the smallest E_b/N_0 at which the EXIT recursion converges.

    Args:
        preset: Preset name (alternative to explicit parameters)
        q: Repetition number
        alpha: Combiner size
        degree_distribution: Edge-perspective fractions {degree: lambda}
        K: Number of users (default: preset design)
        M: Number of receive antennas (default: preset design)
        low_db: Low end of the search window
        high_db: High end of the search window
        resolution_db: Bisection resolution
        exit_model: Decoder curve model, "analytic" (fast) or "monte_carlo"
        grid_points: Size of the a-priori information grid

    Returns:
        ThresholdReport: Threshold, noise level and monotonicity flag
    """
    params = _code(preset, q, alpha, degree_distribution)
    K, M = _dims(preset, K, M)
    config = _exit_config(exit_model, grid_points)
    return _call(
        compute_threshold,
        params,
        K,
        M,
        (low_db, high_db),
        config=config,
        resolution_db=resolution_db,
        cache=_cache,
    )


@mcp.tool()
def capacity_limit(
    K: int,
    M: int,
    rate: float,
    mc_samples: int = 10_000,
    input: Literal["gaussian", "bpsk"] = "gaussian",
    seed: int = 0,
) -> CapacityReport:
    """
    E_b/N_0 at which the average MIMO-NOMA sum capacity equals K * rate.

    Args:
        K: Number of users
        M: Number of receive antennas
        rate: Per-user rate
        mc_samples: Channel draws of the Monte-Carlo average
        input: "gaussian" or "bpsk" input alphabet
        seed: Seed of the channel draws

    Returns:
        CapacityReport: Limit in dB with its Monte-Carlo standard error
    """
    try:
        dims = SystemDims(K=K, M=M)
    except ValidationError as e:
        raise to_mcp_error(ConfigError(e.errors()[0]["msg"], field="K")) from e
    return _call(mimo_noma_capacity_limit, dims, rate, mc_samples, input=input, seed=seed)


def main():
    """Entry point for the MCP server."""
    parser = argparse.ArgumentParser(
        description="Muira MCP Server - EXIT analysis of MU-IRA coded MIMO-NOMA",
        epilog="Examples:\n  uv run muira-mcp\n  uv run muira-mcp --log-level INFO\n",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level on stderr",
    )
    args = parser.parse_args()
    logging.basicConfig(level=getattr(logging, args.log_level))

    # Run the MCP server with stdio transport
    mcp.run(transport="stdio")


if __name__ == "__main__":
    main()

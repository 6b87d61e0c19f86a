#!/usr/bin/env python3
"""
Muira CLI Entry Point

Subcommands for EXIT trajectories, decoding thresholds, degree-distribution
search, BER simulation, capacity limits and the preset inventory.

All commands print JSON on stdout. Errors are printed as a JSON object on
stderr and mapped to the exit code of the error class.
"""

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from pydantic import ValidationError

from muira.capacity import mimo_noma_capacity_limit, point_to_point_capacity_limit
from muira.codec import operation_counts
from muira.config import (
    ExitConfig,
    load_document,
    load_optimizer_config,
    parse_optimizer_config,
    parse_sim_config,
)
from muira.exceptions import EXIT_GENERIC, EXIT_INFEASIBLE, ConfigError, MuiraError
from muira.exit_analysis import (
    decoding_threshold,
    ebn0_to_sigma,
    get_exit_curve,
    run_exit_recursion,
    sigma_to_ebn0,
)
from muira.models import CodeParams, PresetInfo, SystemDims
from muira.optimizer import optimize_degree_distribution
from muira.presets import get_preset, list_presets
from muira.reporting import (
    ber_frame,
    curve_frame,
    read_preset,
    search_log_frame,
    trajectory_frame,
    write_csv,
    write_preset,
)
from muira.simulation import run_ber_simulation

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def parse_ebn0_grid(text: str) -> list[float]:
    """``a:b:step`` (inclusive of b) or a comma-separated list of dB values."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            count = math.floor((stop - start) / step + 1e-9) + 1
            return [round(start + i * step, 10) for i in range(count)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse grid '{text}' (use a:b:step or a,b,c)", field="ebn0") from None


def parse_int_list(text: str, field: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got '{text}'", field=field) from None
    if not values or any(v < 1 for v in values):
        raise ConfigError(f"expected positive integers, got '{text}'", field=field)
    return values


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2))


def _resolve_code(args) -> tuple[CodeParams, PresetInfo | None]:
    if getattr(args, "code_file", None):
        return read_preset(args.code_file), None
    if getattr(args, "preset", None):
        preset = get_preset(args.preset)
        return preset.params, preset
    raise ConfigError("give --preset or --code-file", field="code")


def _resolve_dims(args, preset: PresetInfo | None) -> tuple[int, int]:
    K = args.K if args.K is not None else (preset.K if preset else None)
    M = args.M if args.M is not None else (preset.M if preset else None)
    if K is None or M is None:
        raise ConfigError("give -K and -M (the code has no design dimensions)", field="dims")
    try:
        SystemDims(K=K, M=M)
    except ValidationError as e:
        raise ConfigError(e.errors()[0]["msg"], field="dims") from e
    return K, M


def _exit_config(args) -> ExitConfig:
    update = {}
    if getattr(args, "model", None):
        update["exit_model"] = args.model
    if getattr(args, "grid_points", None):
        update["grid_points"] = args.grid_points
    if getattr(args, "info_len", None):
        update["info_len"] = args.info_len
    if getattr(args, "seed", None) is not None:
        update["seed"] = args.seed
    if getattr(args, "config", None):
        data = {**load_document(args.config), **update}
    else:
        data = update
    try:
        return ExitConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(first["msg"], field=".".join(str(p) for p in first["loc"]) or None) from e


def _with_suffix(path: str, suffix: str) -> Path:
    p = Path(path)
    return p.with_name(f"{p.stem}{suffix}{p.suffix or '.csv'}")


# ============================================================================
# Commands
# ============================================================================


def cmd_presets(args) -> None:
    rows = []
    for p in list_presets():
        rows.append(
            {
                "name": p.name,
                "source": p.source,
                "q": p.params.q,
                "alpha": p.params.alpha,
                "rate": p.params.rate,
                "nominal_rate": p.nominal_rate,
                "K": p.K,
                "M": p.M,
                "sigma_n": p.sigma_n,
                "reference_threshold_db": p.reference_threshold_db,
                "reference_capacity_db": p.reference_capacity_db,
            }
        )
    _emit(rows)


def cmd_exit(args) -> None:
    params, preset = _resolve_code(args)
    K, M = _resolve_dims(args, preset)
    config = _exit_config(args)
    if args.sigma is not None:
        sigma = args.sigma
    elif args.ebn0 is not None:
        sigma = ebn0_to_sigma(args.ebn0, params.rate)
    elif preset and preset.sigma_n:
        sigma = preset.sigma_n
    else:
        raise ConfigError("give --sigma or --ebn0", field="sigma_n")

    curve = get_exit_curve(params, config)
    trajectory = run_exit_recursion(curve, K, M, sigma, config, asymptotic=args.asymptotic)
    if args.output:
        write_csv(trajectory_frame(trajectory), args.output)
    if args.curve_output:
        write_csv(curve_frame(curve, config), args.curve_output)
    final = trajectory.states[-1] if trajectory.states else None
    _emit(
        {
            "status": "success",
            "verdict": trajectory.verdict,
            "iterations": trajectory.iterations_used,
            "sigma_n": sigma,
            "ebn0_db": sigma_to_ebn0(sigma, params.rate),
            "final_I_e": final.I_e if final else None,
            "output": args.output,
        }
    )


def cmd_threshold(args) -> None:
    params, preset = _resolve_code(args)
    K, M = _resolve_dims(args, preset)
    config = _exit_config(args)
    report = decoding_threshold(
        params,
        K,
        M,
        (args.low, args.high),
        config=config,
        resolution_db=args.resolution,
    )
    payload = {"status": "success", **report.model_dump()}
    if preset and preset.reference_threshold_db is not None:
        payload["reference_threshold_db"] = preset.reference_threshold_db
    _emit(payload)


def cmd_optimize(args) -> None:
    if args.config:
        config = load_optimizer_config(args.config)
    else:
        if args.K is None or args.M is None or args.sigma is None:
            raise ConfigError("give --config or all of -K, -M and --sigma", field="config")
        config = parse_optimizer_config({"K": args.K, "M": args.M, "sigma_n": args.sigma})
    update = {}
    if args.seed is not None:
        update["seed"] = args.seed
    if args.q_max is not None:
        update["q_max"] = args.q_max
    if args.no_verify:
        update["verify"] = False
    if update:
        config = parse_optimizer_config({**config.model_dump(by_alias=True), **update})

    result = optimize_degree_distribution(config, progress=args.progress)
    write_preset(
        result.params,
        args.output,
        feasible=result.feasible,
        gap=result.gap,
        K=config.K,
        M=config.M,
        design_sigma_n=config.sigma_n,
        design_ebn0_db=result.design_ebn0_db,
        verified_threshold_db=result.verified_threshold_db,
    )
    if args.log:
        write_csv(search_log_frame(result), args.log)
    _emit(
        {
            "status": "success" if result.feasible else "infeasible",
            "output": args.output,
            "code": result.params.to_config(),
            "rate": result.rate,
            "sum_rate": result.sum_rate,
            "gap": result.gap,
            "design_ebn0_db": result.design_ebn0_db,
            "verified_threshold_db": result.verified_threshold_db,
        }
    )
    if not result.feasible:
        sys.exit(EXIT_INFEASIBLE)


def cmd_ber(args) -> None:
    document = load_document(args.config) if args.config else {}
    if args.preset:
        document["code"] = args.preset
    elif args.code_file:
        document["code"] = read_preset(args.code_file).to_config()
    if "code" not in document:
        raise ConfigError("give --config, --preset or --code-file", field="code")
    dims = dict(document.get("dims", {}))
    if args.K is not None:
        dims["K"] = args.K
    if args.M is not None:
        dims["M"] = args.M
    if not dims and isinstance(document["code"], str):
        preset = get_preset(document["code"])
        dims = {"K": preset.K, "M": preset.M}
    document["dims"] = dims
    if args.ebn0:
        document["ebn0_grid"] = parse_ebn0_grid(args.ebn0)
    for key in ("seed", "workers", "info_len", "fading"):
        value = getattr(args, key)
        if value is not None:
            document[key] = value
    if args.frames is not None:
        document["stop"] = {**document.get("stop", {}), "max_frames": args.frames}
    if args.dynamic_load:
        document["dynamic_load"] = True

    budgets = parse_int_list(args.tau_max, "tau_max") if args.tau_max else [None]
    outputs = []
    for tau in budgets:
        if tau is not None:
            document["tau_max"] = tau
        config = parse_sim_config(document)
        result = run_ber_simulation(config, progress=args.progress)
        path = Path(args.output)
        if len(budgets) > 1:
            path = _with_suffix(args.output, f"_tau{config.tau_max}")
        write_csv(ber_frame(result), path)
        outputs.append(
            {
                "tau_max": config.tau_max,
                "output": str(path),
                "points": [
                    {"ebn0_db": p.ebn0_db, "ber": p.ber, "errors": p.errors, "bits": p.bits}
                    for p in result.points
                ],
            }
        )
    _emit({"status": "success", "runs": outputs})


def cmd_capacity(args) -> None:
    if args.rate is not None:
        rate, preset = args.rate, None
        if args.preset:
            preset = get_preset(args.preset)
    else:
        params, preset = _resolve_code(args)
        rate = params.rate
    if args.single_user:
        _emit(
            {
                "status": "success",
                "rate": rate,
                "input": args.input,
                "limit_db": point_to_point_capacity_limit(rate, args.input),
            }
        )
        return
    K, M = _resolve_dims(args, preset)
    report = mimo_noma_capacity_limit(
        SystemDims(K=K, M=M),
        rate,
        args.samples,
        input=args.input,
        seed=args.seed if args.seed is not None else 0,
    )
    payload = {"status": "success", **report.model_dump()}
    if preset and preset.reference_capacity_db is not None:
        payload["reference_capacity_db"] = preset.reference_capacity_db
    _emit(payload)


def cmd_complexity(args) -> None:
    params, preset = _resolve_code(args)
    K, _ = _resolve_dims(args, preset)
    rate = preset.nominal_rate if preset else None
    counts = operation_counts(params, K, rate)
    _emit({"status": "success", "K": K, **counts._asdict()})


# ============================================================================
# Argument parsing
# ============================================================================


def _add_code_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", help="Built-in code preset name")
    parser.add_argument("--code-file", help="Code JSON written by 'optimize'")
    parser.add_argument("-K", type=int, help="Number of users (default: preset design)")
    parser.add_argument("-M", type=int, help="Receive antennas (default: preset design)")


def _add_exit_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--model", choices=["monte_carlo", "analytic"], help="Decoder EXIT model")
    parser.add_argument("--grid-points", type=int, help="Size of the I_a grid")
    parser.add_argument("--info-len", type=int, help="Info length of the measurement code")
    parser.add_argument("--config", help="ExitConfig file (JSON or TOML)")
    parser.add_argument("--seed", type=int, help="Seed of the curve measurement")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="muira",
        description="MU-IRA codes and LMMSE detection for MIMO-NOMA",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "Examples:\n"
            "  muira presets\n"
            "  muira threshold --preset mu-k8m8-r0.2\n"
            "  muira exit --preset mu-k8m8-r0.2 --ebn0 -9.0 --output traj.csv\n"
            "  muira ber --preset mu-k8m8-r0.2 --ebn0=-9.0:-8.0:0.25 --output ber.csv\n"
            "  muira capacity --preset mu-k8m8-r0.2\n"
            "  muira optimize --config opt.toml --output code.json"
        ),
    )
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level on stderr (default: WARNING)",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Shortcut for --log-level INFO")
    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    presets_parser = subparsers.add_parser("presets", help="List built-in codes")
    presets_parser.set_defaults(func=cmd_presets)

    exit_parser = subparsers.add_parser("exit", help="Run the EXIT recursion at one noise level")
    _add_code_args(exit_parser)
    _add_exit_args(exit_parser)
    exit_parser.add_argument("--sigma", type=float, help="Noise standard deviation")
    exit_parser.add_argument("--ebn0", type=float, help="E_b/N_0 in dB (alternative to --sigma)")
    exit_parser.add_argument("--asymptotic", action="store_true", help="Use the large-system transfer")
    exit_parser.add_argument("--output", help="Trajectory CSV path")
    exit_parser.add_argument("--curve-output", help="Decoder curve CSV path")
    exit_parser.set_defaults(func=cmd_exit)

    threshold_parser = subparsers.add_parser("threshold", help="Bisect the decoding threshold")
    _add_code_args(threshold_parser)
    _add_exit_args(threshold_parser)
    threshold_parser.add_argument("--low", type=float, default=-15.0, help="Window low end (dB)")
    threshold_parser.add_argument("--high", type=float, default=10.0, help="Window high end (dB)")
    threshold_parser.add_argument("--resolution", type=float, default=0.01, help="Resolution (dB)")
    threshold_parser.set_defaults(func=cmd_threshold)

    opt_parser = subparsers.add_parser("optimize", help="Search a degree distribution")
    opt_parser.add_argument("--config", help="OptimizerConfig file (JSON or TOML)")
    opt_parser.add_argument("-K", type=int, help="Number of users")
    opt_parser.add_argument("-M", type=int, help="Receive antennas")
    opt_parser.add_argument("--sigma", type=float, help="Design noise standard deviation")
    opt_parser.add_argument("--q-max", type=int, help="Largest repetition number")
    opt_parser.add_argument("--seed", type=int, help="Search seed")
    opt_parser.add_argument("--no-verify", action="store_true", help="Skip threshold verification")
    opt_parser.add_argument("--output", required=True, help="Code JSON path")
    opt_parser.add_argument("--log", help="Search log CSV path")
    opt_parser.add_argument("--progress", action="store_true", help="Show a progress bar")
    opt_parser.set_defaults(func=cmd_optimize)

    ber_parser = subparsers.add_parser("ber", help="Monte-Carlo BER simulation")
    _add_code_args(ber_parser)
    ber_parser.add_argument("--config", help="SimConfig file (JSON or TOML)")
    ber_parser.add_argument(
        "--ebn0",
        help="E_b/N_0 grid: a:b:step (inclusive) or a,b,c; negative starts need --ebn0=-9:-8:0.25",
    )
    ber_parser.add_argument("--tau-max", help="Iteration budget, or a comma-separated list")
    ber_parser.add_argument("--frames", type=int, help="Maximum frames per point")
    ber_parser.add_argument("--info-len", type=int, help="Info bits per user per frame")
    ber_parser.add_argument("--fading", help="'fast' or 'block(L)'")
    ber_parser.add_argument("--seed", type=int, help="Master seed")
    ber_parser.add_argument("--workers", type=int, help="Worker processes")
    ber_parser.add_argument("--dynamic-load", action="store_true", help="Allow a preset at foreign K")
    ber_parser.add_argument("--output", required=True, help="BER CSV path")
    ber_parser.add_argument("--progress", action="store_true", help="Show progress bars")
    ber_parser.set_defaults(func=cmd_ber)

    cap_parser = subparsers.add_parser("capacity", help="Capacity limit in E_b/N_0")
    _add_code_args(cap_parser)
    cap_parser.add_argument("--rate", type=float, help="Per-user rate (default: the code's rate)")
    cap_parser.add_argument("--input", choices=["gaussian", "bpsk"], default="gaussian")
    cap_parser.add_argument("--samples", type=int, default=10_000, help="Channel draws")
    cap_parser.add_argument("--seed", type=int, help="Seed of the channel draws")
    cap_parser.add_argument(
        "--single-user", action="store_true", help="Point-to-point AWGN limit instead"
    )
    cap_parser.set_defaults(func=cmd_capacity)

    cx_parser = subparsers.add_parser("complexity", help="Decoder operations per info bit")
    _add_code_args(cx_parser)
    cx_parser.set_defaults(func=cmd_complexity)

    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level), format=LOG_FORMAT, stream=sys.stderr, force=True)


def main(argv: list[str] | None = None) -> None:
    """
    Main CLI entry point for muira.

    Exit codes: 0 success, 1 unexpected failure, 2 config error,
    3 infeasible, 4 numerical failure, 5 unknown preset.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging("INFO" if args.verbose else args.log_level)

    if not args.command:
        parser.print_help()
        sys.exit(1)

    try:
        args.func(args)
    except MuiraError as e:
        logger.error(e.message)
        print(
            json.dumps({"status": "error", "code": e.exit_code, "message": e.message, "data": e.data}),
            file=sys.stderr,
        )
        sys.exit(e.exit_code)
    except Exception as e:
        logger.exception("Unexpected failure")
        print(json.dumps({"status": "error", "code": EXIT_GENERIC, "message": str(e)}), file=sys.stderr)
        sys.exit(EXIT_GENERIC)


if __name__ == "__main__":
    main()

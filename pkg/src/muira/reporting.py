"""CSV and JSON writers for results."""

import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd
from pydantic import ValidationError

from muira.config import ExitConfig
from muira.exceptions import ConfigError
from muira.exit_analysis import feedback_variance, mutual_info_to_detector_variance
from muira.models import BerResult, CodeParams, ExitCurve, ExitTrajectory, OptimizationResult

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"
BER_COLUMNS = ["ebn0_db", "bits", "errors", "ber", "ci_low", "ci_high", "frames", "mean_iterations"]
EXIT_COLUMNS = ["iteration", "v", "v_e", "I_a", "I_e"]
LOG_COLUMNS = ["q", "alpha", "target_rate", "rate", "gap", "feasible", "evaluations"]


def ber_frame(result: BerResult) -> pd.DataFrame:
    rows = [{col: getattr(p, col) for col in BER_COLUMNS} for p in result.points]
    return pd.DataFrame(rows, columns=BER_COLUMNS)


def trajectory_frame(trajectory: ExitTrajectory) -> pd.DataFrame:
    rows = [{col: getattr(s, col) for col in EXIT_COLUMNS} for s in trajectory.states]
    return pd.DataFrame(rows, columns=EXIT_COLUMNS)


def curve_frame(curve: ExitCurve, config: ExitConfig | None = None) -> pd.DataFrame:
    """Curve samples in the trajectory layout, plus the per-class outputs.

    ``v_e`` is the detector variance that yields each I_a and ``v`` the
    variance fed back for the curve's output.
    """
    config = config or ExitConfig()
    I_rep, I_par = np.asarray(curve.I_rep), np.asarray(curve.I_par)
    v = curve.rep_fraction * feedback_variance(
        I_rep, config.variance_samples, config.seed
    ) + curve.par_fraction * feedback_variance(I_par, config.variance_samples, config.seed)
    return pd.DataFrame(
        {
            "iteration": np.arange(len(curve.I_a)),
            "v": v,
            "v_e": mutual_info_to_detector_variance(np.asarray(curve.I_a)),
            "I_a": curve.I_a,
            "I_e": curve.I_e,
            "I_rep": I_rep,
            "I_par": I_par,
        }
    )


def search_log_frame(result: OptimizationResult) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in result.log], columns=LOG_COLUMNS)


def write_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    logger.info(f"Wrote {len(frame)} row(s) to {path}")
    return path


def write_preset(params: CodeParams, path: str | Path, **metadata) -> Path:
    """Write a code as JSON usable as the ``code`` entry of a config."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = params.to_config()
    if metadata:
        document["_meta"] = metadata
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Wrote code preset to {path}")
    return path


def read_preset(path: str | Path) -> CodeParams:
    """Load a code written by :func:`write_preset`."""
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read code file {path}: {e}") from e
    document.pop("_meta", None)
    try:
        return CodeParams.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(first["msg"], field=".".join(str(p) for p in first["loc"]) or None) from e

"""Tests for the CSV and preset writers."""

import json

import pandas as pd
import pytest

from muira.config import ExitConfig
from muira.exceptions import ConfigError
from muira.exit_analysis import analytic_exit_curve, run_exit_recursion
from muira.models import BerPoint, BerResult, CandidateRecord, OptimizationResult
from muira.reporting import (
    BER_COLUMNS,
    EXIT_COLUMNS,
    LOG_COLUMNS,
    ber_frame,
    curve_frame,
    read_preset,
    search_log_frame,
    trajectory_frame,
    write_csv,
    write_preset,
)

ANALYTIC = ExitConfig(exit_model="analytic", grid_points=11)


def _point(ebn0: float, errors: int) -> BerPoint:
    return BerPoint(
        ebn0_db=ebn0,
        sigma_n=1.0,
        tau_max=10,
        bits=1000,
        errors=errors,
        frames=5,
        frame_errors=min(errors, 5),
        ci_low=0.0,
        ci_high=0.01,
        mean_iterations=4.2,
    )


# =============================================================================
# CSV frames
# =============================================================================


@pytest.mark.unit
class TestFrames:
    def test_ber_columns(self, tmp_path):
        result = BerResult(points=[_point(-9.0, 12), _point(-8.5, 0)])
        path = write_csv(ber_frame(result), tmp_path / "out" / "ber.csv")
        frame = pd.read_csv(path)
        assert list(frame.columns) == BER_COLUMNS
        assert frame["ber"].tolist() == [0.012, 0.0]
        assert frame["errors"].tolist() == [12, 0]

    def test_trajectory_columns(self, full_loading_code, tmp_path):
        curve = analytic_exit_curve(full_loading_code, config=ANALYTIC)
        traj = run_exit_recursion(curve, 8, 8, 1.0, ANALYTIC)
        frame = pd.read_csv(write_csv(trajectory_frame(traj), tmp_path / "traj.csv"))
        assert list(frame.columns) == EXIT_COLUMNS
        assert len(frame) == traj.iterations_used
        assert frame["iteration"].iloc[0] == 1

    def test_curve_frame(self, full_loading_code):
        curve = analytic_exit_curve(full_loading_code, config=ANALYTIC)
        frame = curve_frame(curve, ANALYTIC)
        assert list(frame.columns) == EXIT_COLUMNS + ["I_rep", "I_par"]
        assert len(frame) == 11
        assert frame["v"].iloc[0] == pytest.approx(1.0)
        assert frame["v_e"].iloc[0] == float("inf")

    def test_search_log(self, regular_code):
        record = CandidateRecord(q=2, alpha=3, target_rate=0.3, rate=0.3, gap=0.01, feasible=True, evaluations=7)
        result = OptimizationResult(
            params=regular_code,
            rate=regular_code.rate,
            sum_rate=regular_code.rate,
            feasible=True,
            gap=0.01,
            design_sigma_n=1.0,
            design_ebn0_db=1.76,
            log=[record],
        )
        frame = search_log_frame(result)
        assert list(frame.columns) == LOG_COLUMNS
        assert frame.iloc[0]["evaluations"] == 7


# =============================================================================
# Code presets on disk
# =============================================================================


@pytest.mark.unit
class TestPresetFiles:
    def test_write_then_read(self, full_loading_code, tmp_path):
        path = write_preset(full_loading_code, tmp_path / "code.json", K=8, M=8)
        document = json.loads(path.read_text())
        assert document["_meta"] == {"K": 8, "M": 8}
        assert read_preset(path) == full_loading_code

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            read_preset(tmp_path / "none.json")

    def test_invalid_code(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"q": 2, "alpha": 0, "lambda": {"3": 1.0}}))
        with pytest.raises(ConfigError) as exc_info:
            read_preset(path)
        assert exc_info.value.field == "alpha"

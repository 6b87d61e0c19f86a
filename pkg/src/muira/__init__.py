"""
Muira: MU-IRA codes and LMMSE detection for MIMO-NOMA

Encoder and decoder for multi-user irregular repeat-accumulate codes, an
iterative LMMSE receiver, EXIT-chart analysis with threshold search,
degree-distribution optimization and a Monte-Carlo BER harness.
"""

from muira.codec import CodeInstance, build_code, decode_activation, encode
from muira.config import ExitConfig, SimConfig
from muira.exceptions import (
    ConfigError,
    InfeasibleError,
    MuiraError,
    NumericalError,
    UnknownPresetError,
)
from muira.exit_analysis import decoding_threshold, get_exit_curve, run_exit_recursion
from muira.models import CodeParams, DegreeDistribution, SystemDims
from muira.presets import get_preset, list_presets
from muira.simulation import run_ber_simulation

__version__ = "0.1.0"
__all__ = [
    "CodeInstance",
    "CodeParams",
    "ConfigError",
    "DegreeDistribution",
    "ExitConfig",
    "InfeasibleError",
    "MuiraError",
    "NumericalError",
    "SimConfig",
    "SystemDims",
    "UnknownPresetError",
    "build_code",
    "decode_activation",
    "decoding_threshold",
    "encode",
    "get_exit_curve",
    "get_preset",
    "list_presets",
    "run_ber_simulation",
    "run_exit_recursion",
]

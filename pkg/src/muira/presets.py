"""
Built-in code presets.

Six MU-IRA codes designed for fixed (K, M) at a design noise level, four
single-user IRA codes (``q = 1``) and one MAC-IRA code (``alpha = 1``).
Published fractions sum to one only to six decimals, so every preset is
normalized on construction.
"""

import logging

from muira.exceptions import UnknownPresetError
from muira.models import CodeParams, DegreeDistribution, PresetInfo

logger = logging.getLogger(__name__)


def _preset(
    name: str,
    source: str,
    q: int,
    alpha: int,
    fractions: dict[int, float],
    nominal_rate: float,
    *,
    K: int | None = None,
    M: int | None = None,
    sigma_n: float | None = None,
    threshold_db: float | None = None,
    capacity_db: float | None = None,
) -> PresetInfo:
    params = CodeParams(q=q, alpha=alpha, lambda_=DegreeDistribution.normalized(fractions))
    return PresetInfo(
        name=name,
        source=source,
        params=params,
        K=K,
        M=M,
        sigma_n=sigma_n,
        nominal_rate=nominal_rate,
        reference_threshold_db=threshold_db,
        reference_capacity_db=capacity_db,
    )


_PRESETS: dict[str, PresetInfo] = {
    p.name: p
    for p in (
        _preset(
            "mu-k8m8-r0.2", "MU-IRA, full loading", 2, 4,
            {3: 0.14619, 10: 0.212715, 30: 0.223699, 50: 0.112159, 100: 0.305237},
            0.2, K=8, M=8, sigma_n=4.58, threshold_db=-9.22, capacity_db=-9.39,
        ),
        _preset(
            "mu-k16m8-r0.15", "MU-IRA, over loading", 2, 3,
            {3: 0.129157, 10: 0.173591, 30: 0.125162, 80: 0.384998, 100: 0.187092},
            0.15, K=16, M=8, sigma_n=5.27, threshold_db=-9.2, capacity_db=-9.28,
        ),
        _preset(
            "mu-k24m8-r0.13", "MU-IRA, severe loading", 2, 2,
            {3: 0.174135, 10: 0.153139, 30: 0.254471, 50: 0.085083, 80: 0.333171},
            0.13, K=24, M=8, sigma_n=5.52, threshold_db=-8.99, capacity_db=-9.06,
        ),
        _preset(
            "mu-k32m8-r0.1", "MU-IRA, severe loading", 2, 2,
            {3: 0.121532, 10: 0.113888, 30: 0.103885, 80: 0.152555, 100: 0.50814},
            0.1, K=32, M=8, sigma_n=6.34, threshold_db=-9.05, capacity_db=-9.1,
        ),
        _preset(
            "mu-k32m4-r0.1", "MU-IRA, severe loading", 4, 2,
            {3: 0.207197, 10: 0.036035, 30: 0.139163, 50: 0.048337, 80: 0.136988, 100: 0.43228},
            0.1, K=32, M=4, sigma_n=3.81, threshold_db=-4.65, capacity_db=-4.74,
        ),
        _preset(
            "mu-k64m8-r0.1", "MU-IRA, severe loading", 4, 2,
            {3: 0.204955, 10: 0.044794, 30: 0.0638, 50: 0.066099, 80: 0.313755, 100: 0.306596},
            0.1, K=64, M=8, sigma_n=5.43, threshold_db=-7.71, capacity_db=-7.78,
        ),
        _preset(
            "su-r0.2", "SU-IRA", 1, 4,
            {3: 0.099822, 10: 0.214201, 30: 0.023108, 80: 0.186412, 100: 0.476457},
            0.2, threshold_db=-0.8, capacity_db=-0.96,
        ),
        _preset(
            "su-r0.15", "SU-IRA", 1, 3,
            {3: 0.091575, 10: 0.171829, 30: 0.122928, 80: 0.278914, 100: 0.334754},
            0.15, threshold_db=-1.05, capacity_db=-1.13,
        ),
        _preset(
            "su-r0.13", "SU-IRA", 1, 2,
            {3: 0.118814, 10: 0.204525, 30: 0.196695, 50: 0.346954, 80: 0.016878, 100: 0.116134},
            0.13, threshold_db=-1.11, capacity_db=-1.19,
        ),
        _preset(
            "su-r0.1", "SU-IRA", 1, 2,
            {3: 0.085867, 10: 0.132226, 30: 0.198883, 80: 0.276011, 100: 0.307013},
            0.1, threshold_db=-1.24, capacity_db=-1.29,
        ),
        _preset(
            "mac-ira", "MAC-IRA", 5, 1,
            {2: 0.063021, 3: 0.228288, 10: 0.111951, 30: 0.226877, 50: 0.369864},
            0.08,
        ),
    )
}


def list_presets() -> list[PresetInfo]:
    """All shipped presets in a stable order."""
    return list(_PRESETS.values())


def preset_names() -> list[str]:
    return list(_PRESETS)


def get_preset(name: str) -> PresetInfo:
    """Look up a preset by name (case-insensitive)."""
    try:
        return _PRESETS[name.strip().lower()]
    except KeyError:
        logger.debug(f"Preset lookup failed for '{name}'")
        raise UnknownPresetError(name) from None


def resolve_code(code: CodeParams | str) -> tuple[CodeParams, PresetInfo | None]:
    """Turn a config ``code`` entry into parameters plus the preset it names."""
    if isinstance(code, CodeParams):
        return code, None
    preset = get_preset(code)
    return preset.params, preset

"""
Pytest configuration and fixtures for muira tests

Shared codes, small code instances and seeded generators.
"""

import sys
from pathlib import Path

# Add src directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

import numpy as np
import pytest

from muira.codec import build_code, build_code_from_degrees
from muira.models import CodeParams, DegreeDistribution
from muira.presets import get_preset

# =============================================================================
# Codes
# =============================================================================


@pytest.fixture
def full_loading_code() -> CodeParams:
    """Full-loading MU-IRA code (K = M = 8, R = 0.2)."""
    return get_preset("mu-k8m8-r0.2").params


@pytest.fixture
def regular_code() -> CodeParams:
    """Every info bit of degree 3, q = 2, alpha = 3."""
    return CodeParams(q=2, alpha=3, lambda_=DegreeDistribution.normalized({3: 1.0}))


@pytest.fixture
def small_instance(full_loading_code):
    """Full-loading code on 256 info bits, four users."""
    return build_code(full_loading_code, 256, seed=11, n_users=4)


@pytest.fixture
def toy_instance():
    """Cycle-free graph: four degree-1 info bits, q = 2, alpha = 2."""
    return build_code_from_degrees([1, 1, 1, 1], q=2, alpha=2, seed=5)


# =============================================================================
# Randomness
# =============================================================================


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)

"""Deterministic sub-seed derivation.

One master seed drives a run. Each random component gets its own stream by
appending a fixed component offset (and optional indices such as the frame
or user number) to the master seed's entropy.
"""

from enum import IntEnum

import numpy as np


class Component(IntEnum):
    """Fixed offsets that separate the random streams of a run."""

    CHANNEL = 0
    NOISE = 1
    CSI = 2
    INTERLEAVER = 3
    DATA = 4
    EXIT = 5
    OPTIMIZER = 6


def derive_seed(master: int, component: Component, *indices: int) -> np.random.SeedSequence:
    """Build the seed sequence for one component (and optional sub-indices)."""
    if master < 0:
        raise ValueError(f"master seed must be non-negative, got {master}")
    return np.random.SeedSequence([int(master), int(component), *(int(i) for i in indices)])


def make_rng(master: int, component: Component, *indices: int) -> np.random.Generator:
    """Shorthand for a Generator seeded by :func:`derive_seed`."""
    return np.random.default_rng(derive_seed(master, component, *indices))

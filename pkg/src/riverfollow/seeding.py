"""Named RNG sub-streams derived from one master seed.

Every run derives the same four independent streams, so changing how
one consumer uses randomness never perturbs the others.
"""

from __future__ import annotations

import numpy as np

STREAM_NAMES = ("init", "env", "noise", "scenario")


def seed_streams(seed: int | None) -> dict[str, np.random.Generator]:
    """Split a master seed into the named generator streams."""
    children = np.random.SeedSequence(seed).spawn(len(STREAM_NAMES))
    return {name: np.random.default_rng(child)
            for name, child in zip(STREAM_NAMES, children)}

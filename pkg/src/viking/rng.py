"""Seeding helpers.

All randomness in the package flows from integer seeds through PCG64
generators. Independent streams for one seed are derived with seed-sequence
spawn keys, so data generation and filter Monte-Carlo draws never share a
stream. Normal variates use numpy's ziggurat ``standard_normal``; traces are
bit-reproducible for a fixed numpy version.
"""

from __future__ import annotations

import numpy as np

STREAM_DESIGN = 0
STREAM_THETA0 = 1
STREAM_STATE_NOISE = 2
STREAM_OBS_NOISE = 3
STREAM_MIXTURE = 4
STREAM_FILTER = 10


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """PCG64 generator on an independent stream derived from ``(seed, stream)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))

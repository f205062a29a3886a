"""
Named random streams.

Every consumer draws from its own stream derived from the run seed and a
stream name, so adding draws in one module never shifts another's samples.
"""

import zlib

import numpy as np


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for (seed, name)"""
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key,)))

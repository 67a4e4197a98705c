"""Named, reproducible RNG streams.

All stochastic pieces of the toolkit (mask sampling, noise tensors, corpus
shuffling, weight init) draw from independent streams derived from a single
root seed, so one --seed pins the whole experiment.
"""
from __future__ import annotations

import zlib

import numpy as np


def stream_key(name: str) -> int:
    """Stable 32-bit key for a stream name (platform independent)."""
    return zlib.crc32(name.encode("utf-8")) & 0xFFFFFFFF


def named_stream(seed: int, name: str, *indices: int) -> np.random.Generator:
    """Independent generator for (seed, name, indices...).

    Identical arguments give identical streams on every platform; different
    names or indices give statistically independent streams. Extra indices
    support per-item streams, e.g. one mask stream per eval image.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(stream_key(name), *indices))
    return np.random.Generator(np.random.PCG64(ss))

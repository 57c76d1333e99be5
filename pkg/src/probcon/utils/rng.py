"""
Seeded Random Streams

Every random draw in an experiment comes from a named sub-stream of the single
config seed, so results never depend on ambient entropy or call order across
components.
"""

import zlib
from typing import Tuple

import numpy as np


def stream_key(name: str) -> int:
    """Stable integer key for a stream name (CRC32, identical across runs)."""
    return zlib.crc32(name.encode("utf-8"))


def named_stream(seed: int, name: str, *index: int) -> np.random.Generator:
    """Create the generator for sub-stream ``name`` of ``seed``.

    Args:
        seed: Master seed of the experiment
        name: Stream name, e.g. ``"process"`` or ``"triplets"``
        *index: Optional extra integers (worker, chunk or sweep entry index)

    Returns:
        An independent ``numpy.random.Generator``
    """
    spawn_key: Tuple[int, ...] = (stream_key(name), *index)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=spawn_key))


def child_seed(rng: np.random.Generator) -> int:
    """Draw a 63-bit seed from ``rng`` for deriving chunked sub-streams."""
    return int(rng.integers(0, 2**63 - 1))

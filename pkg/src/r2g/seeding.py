"""Seed splitting.

Every stream is ``PCG64(SeedSequence([master_seed, crc32(label)]))``. The
label hash is stable across processes and Python versions (unlike ``hash``),
so a run is fully determined by its master seed.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

STREAM_LABELS = ("init", "explore", "batch", "noise")


def stream(master_seed: int, label: str) -> np.random.Generator:
    key = zlib.crc32(label.encode("utf-8"))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(master_seed), key])))


@dataclass
class Streams:
    seed: int
    init: np.random.Generator
    explore: np.random.Generator
    batch: np.random.Generator
    noise: np.random.Generator


def seed_everything(seed: int) -> Streams:
    """Independent generators for initialisation, exploration, batching and noise."""
    return Streams(int(seed), *(stream(seed, label) for label in STREAM_LABELS))

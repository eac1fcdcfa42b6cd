"""Labeled sub-streams derived from one master seed."""

from __future__ import annotations

import zlib

import numpy as np


def label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def seed_sequence(seed: int, label: str, *index: int) -> np.random.SeedSequence:
    """SeedSequence for stream ``label`` (and optional replicate indices) under ``seed``."""
    return np.random.SeedSequence(entropy=int(seed), spawn_key=(label_key(label), *map(int, index)))


def make_rng(seed: int, label: str, *index: int) -> np.random.Generator:
    """Independent, reproducible generator for one labeled purpose.

    >>> a = make_rng(7, "pattern").random()
    >>> a == make_rng(7, "pattern").random()
    True
    """
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, label, *index)))


def child_seed(seed: int, label: str, *index: int) -> int:
    """A 63-bit integer seed for a labeled child run (e.g. one replicate)."""
    state = seed_sequence(seed, label, *index).generate_state(1, dtype=np.uint64)[0]
    return int(state >> np.uint64(1))

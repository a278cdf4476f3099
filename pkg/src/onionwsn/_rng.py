"""Seed plumbing shared by every randomized component."""
from __future__ import annotations

import hashlib
import random
from typing import Union

SeedLike = Union[int, random.Random, None]


def derive_seed(seed: int, *labels: object) -> int:
    """Derive an independent 64-bit seed from ``seed`` and a label path."""
    h = hashlib.blake2b(digest_size=8, person=b"onionwsn-seed")
    h.update(str(int(seed)).encode())
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "big")


def as_rng(seed: SeedLike) -> random.Random:
    if isinstance(seed, random.Random):
        return seed
    return random.Random(seed)

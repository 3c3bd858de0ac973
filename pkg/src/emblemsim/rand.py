"""Deterministic random substreams.

Every stochastic component of the simulation draws from a substream keyed
by (scenario seed, purpose, entity, tick, ...).  Keys are hashed with
SHA-256 so substreams are independent of dict iteration order and of the
platform, which is what makes run logs byte-identical across machines.
"""

from __future__ import annotations

import hashlib
import random

import numpy as np


def derive_seed(*parts: int | str | bytes) -> int:
    """Collapse a key tuple into a 64-bit seed, stably across platforms."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, bytes):
            raw = part
        elif isinstance(part, int):
            raw = part.to_bytes(16, "big", signed=True)
        else:
            raw = str(part).encode("utf-8")
        h.update(len(raw).to_bytes(4, "big"))
        h.update(raw)
    return int.from_bytes(h.digest()[:8], "big")


def substream(*parts: int | str | bytes) -> np.random.Generator:
    """NumPy generator for the given key (bit corruption, noise draws)."""
    return np.random.Generator(np.random.PCG64(derive_seed(*parts)))


def pystream(*parts: int | str | bytes) -> random.Random:
    """``random.Random`` for the given key (slot picks, small draws)."""
    return random.Random(derive_seed(*parts))

"""Deterministic seed derivation.

Every randomized operation takes an explicit integer seed; sub-streams are
derived by hashing the parent seed together with string/int call tags, so
results never depend on global RNG state, call order, or worker count.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts: int | str) -> int:
    """Hash a parent seed and call tags into a fresh 63-bit seed."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, str):
            h.update(b"s" + part.encode("utf-8"))
        elif isinstance(part, (int, np.integer)):
            h.update(b"i" + int(part).to_bytes(16, "little", signed=True))
        else:
            raise TypeError(f"seed parts must be int or str, got {type(part).__name__}")
        h.update(b"\x00")
    return int.from_bytes(h.digest()[:8], "little") >> 1


def rng_from(*parts: int | str) -> np.random.Generator:
    """Generator seeded by `derive_seed(*parts)`."""
    return np.random.default_rng(derive_seed(*parts))

"""Deterministic random-stream derivation.

Every stochastic draw in the library goes through derive_rng so that a run is
fully determined by one master seed plus a structural path (purpose string,
trial index, entity index). Streams for different paths are statistically
independent and insensitive to execution order, which keeps parallel sweeps
reproducible.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_rng"]

_MASK64 = (1 << 64) - 1


def _token(part) -> int:
    if isinstance(part, (bool, float)):
        part = str(part)
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK64
    digest = hashlib.blake2s(str(part).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def derive_rng(master_seed: int, *path) -> np.random.Generator:
    """Generator keyed by (master_seed, *path); path items are ints or strings."""
    entropy = [int(master_seed) & _MASK64] + [_token(p) for p in path]
    return np.random.default_rng(np.random.SeedSequence(entropy))

"""Hierarchical random streams: one root seed reproduces a whole experiment.

Every component derives its generator from the root seed plus a semantic
path (e.g. ``("trajectory", 12)``), so any cell of any sweep is reproducible
in isolation and independent of evaluation order.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["child_rng", "child_seed_sequence"]


def _key_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    digest = hashlib.sha256(str(key).encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def child_seed_sequence(root_seed: int, *path) -> np.random.SeedSequence:
    entropy = [int(root_seed) & 0xFFFFFFFF] + [_key_int(k) for k in path]
    return np.random.SeedSequence(entropy)


def child_rng(root_seed: int, *path) -> np.random.Generator:
    """Generator keyed by (root seed, semantic path)."""
    return np.random.default_rng(child_seed_sequence(root_seed, *path))

"""Named deterministic random substreams.

Every stochastic component draws from a Generator keyed by a path of
tokens under one base seed, e.g. ``substream(seed, "prior", iteration,
company_id)``.  Streams for different paths are statistically independent
and stable across runs, so adding bootstrap iterations or reordering
companies never perturbs draws made elsewhere.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _token_words(token) -> list[int]:
    # ints map to their 64-bit pattern; everything else is hashed by repr
    if isinstance(token, (int, np.integer)):
        value = int(token)
        return [value & 0xFFFFFFFF, (value >> 32) & 0xFFFFFFFF]
    digest = hashlib.blake2s(str(token).encode("utf-8"), digest_size=8).digest()
    return [
        int.from_bytes(digest[:4], "little"),
        int.from_bytes(digest[4:], "little"),
    ]


def substream(base_seed: int, *path) -> np.random.Generator:
    """Independent Generator for the stream named by (base_seed, *path)."""
    words: list[int] = []
    for token in (base_seed, *path):
        words.extend(_token_words(token))
    return np.random.default_rng(np.random.SeedSequence(words))


def stream_seed(base_seed: int, *path) -> int:
    """Stable nonnegative integer seed derived from the same path scheme."""
    return int(substream(base_seed, *path).integers(0, 2**63))

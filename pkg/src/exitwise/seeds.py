"""Purpose-tagged random streams.

All randomness in a run flows from one 64-bit seed. Components draw from
independent substreams keyed by a short purpose tag, so any subsystem can be
replayed in isolation: stream(seed, tag) seeds a generator from the pair
(seed, sha256(tag)[:8]).
"""

import hashlib

import numpy as np


def stream(seed: int, tag: str) -> np.random.Generator:
    """Derive an independent generator for (seed, purpose tag)."""
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    tag_word = int.from_bytes(digest[:8], "little")
    return np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, tag_word])


def resolve_rng(seed_or_rng, tag: str) -> np.random.Generator:
    """Accept either a raw seed or an already-derived generator."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return stream(int(seed_or_rng), tag)

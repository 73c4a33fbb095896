"""Named derivation of RNG streams from a single master seed.

Every source of randomness in the pipeline (splitting, shuffling,
augmentation, weight init) draws from its own stream, derived from the
master seed plus a tuple of string/int tags.  Streams are therefore
independent of scheduling and of each other: adding a consumer never
perturbs existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master: int, *tags: object) -> int:
    """Derive a child seed from ``master`` and a tag tuple, stably across runs."""
    h = hashlib.sha256()
    h.update(str(int(master)).encode())
    for tag in tags:
        h.update(b"/")
        h.update(str(tag).encode())
    return int.from_bytes(h.digest()[:8], "little")


def derived_rng(master: int, *tags: object) -> np.random.Generator:
    """A ``numpy.random.Generator`` seeded by ``derive_seed(master, *tags)``."""
    return np.random.default_rng(derive_seed(master, *tags))

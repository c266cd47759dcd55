"""Seed stream derivation.

Every random stream in a run is keyed by ``(root_seed, label)``; the label is
hashed together with the root so that any sub-experiment can be reproduced in
isolation from its root seed and its label alone.
"""
import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(root: int, *labels) -> int:
    """Return a 64-bit seed derived from ``root`` and a label path."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(root) & MASK64).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest(), "little")


def stream(root: int, *labels) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, *labels))

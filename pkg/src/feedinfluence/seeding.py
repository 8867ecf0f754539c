"""Hierarchical seed derivation.

Sub-seeds are hashed from a master seed plus a path of labels, so adding
users or reordering work leaves everyone else's random stream untouched.
"""
import hashlib

import numpy as np


def derive_seed(master: int, *path) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(repr(int(master)).encode())
    for part in path:
        h.update(b"\x1f")
        h.update(repr(part).encode())
    return int.from_bytes(h.digest(), "little")


def rng_for(master: int, *path) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *path))

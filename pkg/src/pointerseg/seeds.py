"""Seed derivation.

Every random stream in the package hangs off one master seed through
derive_seed(master, *tags).  Tags name the purpose ("train", "scene",
index...), so adding or removing one consumer never shifts the streams
of the others.
"""

import hashlib

import numpy as np


def derive_seed(master: int, *tags) -> int:
    """Hash (master, tags...) into a stable 64-bit stream seed."""
    text = "/".join([str(int(master))] + [str(t) for t in tags])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(master: int, *tags) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *tags))

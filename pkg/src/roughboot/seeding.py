"""Order-independent seed derivation.

Every random stream in the package is keyed by ``(master_seed, tag, index)``
so that a replication's randomness never depends on which worker ran it or
in what order.
"""

from __future__ import annotations

import hashlib
import secrets
import struct

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_seed(master_seed: int, tag: str, index: int = 0) -> int:
    """Hash ``(master_seed, tag, index)`` into a 64-bit unsigned seed."""
    h = hashlib.blake2b(digest_size=8, person=b"roughboot")
    h.update(struct.pack("<Q", int(master_seed) & _MASK64))
    h.update(tag.encode("utf-8"))
    h.update(b"\x00")
    h.update(struct.pack("<q", int(index)))
    return int.from_bytes(h.digest(), "little")


def rng_from(master_seed: int, tag: str, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, tag, index)))


def entropy_seed() -> int:
    """Fresh 64-bit seed from system entropy (recorded by callers)."""
    return secrets.randbits(64)

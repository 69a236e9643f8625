"""Reproducible random-number streams.

Every stochastic routine in this package draws from a stream derived from a
(master seed, stream index) pair by hashing, so that trial i sees the same
stream whether trials run serially, in any order, or across worker processes.
"""

from __future__ import annotations

import hashlib
import random

_DIGEST_BYTES = 16


def _signed_bytes(value: int) -> bytes:
    """Big-endian signed encoding, at least 16 bytes so derived seeds (which
    exceed the signed 16-byte range) can themselves serve as master seeds."""
    length = _DIGEST_BYTES
    while True:
        try:
            return value.to_bytes(length, "big", signed=True)
        except OverflowError:
            length += 1


def derive_seed(master_seed: int, index: int, tag: str = "") -> int:
    """Derive an independent integer seed from a master seed and a stream index."""
    h = hashlib.blake2b(digest_size=_DIGEST_BYTES)
    h.update(tag.encode())
    h.update(_signed_bytes(int(master_seed)))
    h.update(_signed_bytes(int(index)))
    return int.from_bytes(h.digest(), "big")


def stream(master_seed: int, index: int, tag: str = "") -> random.Random:
    """A fresh generator for stream `index` under `master_seed`."""
    return random.Random(derive_seed(master_seed, index, tag))

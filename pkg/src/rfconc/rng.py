"""Seeded substreams.

Every random draw in the package comes from a Philox generator whose key is
a hash of ``(root_seed, *tags)``.  Streams for different purposes or
coordinates are therefore independent of each other and of the order in
which they are created, which keeps parallel runs schedule-independent.
"""

import hashlib

import numpy as np


def stream_key(root_seed, *tags):
    h = hashlib.blake2b(digest_size=16, person=b"rfconc-stream")
    h.update(repr(int(root_seed)).encode())
    for tag in tags:
        h.update(b"\x1f")
        h.update(repr(tag).encode())
    return int.from_bytes(h.digest(), "little")


def substream(root_seed, *tags):
    """Return a fresh ``numpy.random.Generator`` for ``(root_seed, *tags)``."""
    return np.random.Generator(np.random.Philox(key=stream_key(root_seed, *tags)))


def derive_seed(root_seed, *tags):
    """A 63-bit integer seed derived from ``(root_seed, *tags)``."""
    return stream_key(root_seed, *tags) & ((1 << 63) - 1)

"""Deterministic random streams.

Every stochastic component draws from a numpy ``Generator`` backed by PCG64.
Stream seeds are derived with BLAKE2b from a (root seed, purpose tag) pair,
so independent consumers (init, shuffle, dropout, stubs, ...) get
reproducible, non-overlapping streams and adding a new consumer never
perturbs existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(seed: int, tag: str) -> np.random.Generator:
    """Return the PCG64 stream for ``tag`` under the given root seed."""
    key = int(seed).to_bytes(8, "little", signed=False)
    h = hashlib.blake2b(tag.encode("utf-8"), digest_size=16, key=key)
    return np.random.Generator(np.random.PCG64(int.from_bytes(h.digest(), "little")))


def stream_from_bytes(data: bytes, tag: str) -> np.random.Generator:
    """Like :func:`stream` but keyed by raw bytes (e.g. a content id)."""
    h = hashlib.blake2b(data, digest_size=16, key=tag.encode("utf-8")[:64])
    return np.random.Generator(np.random.PCG64(int.from_bytes(h.digest(), "little")))

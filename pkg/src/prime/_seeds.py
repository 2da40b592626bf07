"""Stable sub-seed derivation shared by every stochastic stage."""

from __future__ import annotations

import hashlib


def derive_seed(seed: int | None, *keys: object) -> int:
    """Hash ``seed`` and ``keys`` into a 64-bit seed, independent of PYTHONHASHSEED."""
    h = hashlib.blake2b(digest_size=8)
    h.update(repr(seed).encode())
    for k in keys:
        h.update(b"\x1f")
        h.update(repr(k).encode())
    return int.from_bytes(h.digest(), "big")

"""Counter-based random streams.

A stream is a 64-bit key; the value at counter ``c`` is a fixed hash of
``(key, c)``, so any slice of any stream can be regenerated independently
of how much of it was consumed before, by whom, or in which order. Keys are
derived from a seed and a path of integer tags (replica id, tree level,
round...), which is what makes results independent of worker count.

Uniforms carry 53 random bits and live in the open interval (0, 1). Normal
variates come from the AS241 inverse CDF.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

from . import _backend
from ._pykernels import GOLDEN, mix64

__all__ = ["CounterRNG", "Tag", "derive_keys", "ndtri"]

_ROOT = 0x6A09E667F3BCC908


class Tag(IntEnum):
    """Stream names used when deriving child keys."""

    REPLICA = 1
    LEVEL = 2
    XI = 3
    ZETA = 4
    GENERATION = 5
    ROUND_WEIGHT = 6
    ROUND_PICK = 7
    WEIGHT = 8
    LEAF = 9
    SAMPLE = 10


def _tag_hash(tag):
    t = np.asarray(tag, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64((t + np.uint64(1)) * np.uint64(GOLDEN))


def derive_keys(keys, *tags):
    """Child keys of *keys* along a tag path; arrays broadcast elementwise."""
    out = np.asarray(keys, dtype=np.uint64)
    for tag in tags:
        out = mix64(out ^ _tag_hash(tag))
    return out


def seed_key(seed: int) -> int:
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must be in [0, 2**64), got {seed}")
    return int(derive_keys(np.uint64(_ROOT), int(seed)))


def ndtri(p):
    """Standard normal quantile via the active backend."""
    return _backend.kernels().ndtri(p)


class CounterRNG:
    """A keyed stream with a read position.

    ``child(*tags)`` returns an independent stream; ``uniform``/``normal``
    read the next values and advance. Two instances built from the same seed
    and tag path always produce the same numbers.
    """

    def __init__(self, seed: int | None = None, *, key: int | None = None):
        if (seed is None) == (key is None):
            raise ValueError("give exactly one of seed or key")
        self.key = seed_key(seed) if key is None else int(key) & (2**64 - 1)
        self.position = 0

    def __repr__(self):
        return f"CounterRNG(key=0x{self.key:016x}, position={self.position})"

    def child(self, *tags) -> CounterRNG:
        return CounterRNG(key=int(derive_keys(np.uint64(self.key), *tags)))

    def child_keys(self, *tags) -> np.ndarray:
        """Vectorised :meth:`child`: tags may be integer arrays."""
        return np.atleast_1d(derive_keys(np.uint64(self.key), *tags))

    def _keys(self):
        return np.array([self.key], dtype=np.uint64)

    def uniform_at(self, start: int, count: int) -> np.ndarray:
        return _backend.kernels().uniform_block(self._keys(), start, count)[0]

    def normal_at(self, start: int, count: int) -> np.ndarray:
        return _backend.kernels().normal_block(self._keys(), start, count)[0]

    def uniform(self, count: int) -> np.ndarray:
        out = self.uniform_at(self.position, count)
        self.position += count
        return out

    def normal(self, count: int) -> np.ndarray:
        out = self.normal_at(self.position, count)
        self.position += count
        return out

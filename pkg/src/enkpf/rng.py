"""Deterministic hierarchical random streams.

Streams are addressed by a path of keys on top of a counter-based bit
generator (Philox). Sibling streams are statistically independent and fully
isolated: skipping or reordering draws in one stream never shifts another.
That is what lets the bridged update reuse identical noise for every probed
value of the bridge parameter, and what makes experiment output independent
of evaluation order.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

__all__ = ["RngNode"]

_KEY_SPACE = 2**32


def _as_key(key) -> int:
    """Map a path element (small int or short string) to a 32-bit key."""
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    k = int(key)
    if not 0 <= k < _KEY_SPACE:
        raise ValueError(f"integer stream keys must lie in [0, 2^32), got {key}")
    return k


@dataclass(frozen=True)
class RngNode:
    """One node in a seeded stream tree; `child(...)` derives sub-nodes by key."""

    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if int(self.seed) < 0:
            raise ValueError("seed must be a nonnegative integer")

    def child(self, *keys) -> "RngNode":
        return RngNode(self.seed, self.path + tuple(_as_key(k) for k in keys))

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.seed), spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))

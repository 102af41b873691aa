"""Counter-based random streams keyed by (seed, stream).

Every stochastic routine takes an `Rng` handle instead of a global state.
The underlying bit generator is Philox keyed directly by the two 64-bit
ids, so identical (seed, stream) pairs produce identical draw sequences
on every platform and under any parallel schedule.  Child streams are
derived by hashing tags into a fresh stream id, which lets e.g. each grid
node or dataset own an independent, reproducible stream.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _hash_tags(stream: int, tags: tuple) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(stream.to_bytes(8, "little"))
    for tag in tags:
        if isinstance(tag, str):
            data = b"s" + tag.encode("utf-8")
        elif isinstance(tag, (int, np.integer)):
            data = b"i" + int(tag).to_bytes(16, "little", signed=True)
        else:
            raise TypeError(f"stream tags must be int or str, got {type(tag)!r}")
        h.update(len(data).to_bytes(2, "little"))
        h.update(data)
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class Rng:
    """Handle for a reproducible random stream.

    Parameters
    ----------
    seed : int
        Master seed, 64-bit.
    stream : int
        Stream id, 64-bit.  Derived ids come from `substream`.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(self, "stream", int(self.stream) & _MASK64)

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, *tags) -> "Rng":
        """Derive a child stream from int/str tags.

        The derivation is a keyed hash, so distinct tag tuples give
        independent streams and the same tags always give the same one.
        """
        return Rng(self.seed, _hash_tags(self.stream, tags))

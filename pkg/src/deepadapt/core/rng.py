"""Counter-based random streams.

A stream is fully described by ``(seed, counter)``. Each draw call consumes
one counter value and uses a fresh Philox generator keyed by the seed, so the
same pair always reproduces the same numbers and a stream can be checkpointed
by storing two integers.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

_MASK64 = (1 << 64) - 1

Shape = Union[int, Sequence[int]]


@dataclass
class RngStream:
    """Deterministic random stream keyed by a 64-bit seed."""

    seed: int
    counter: int = 0

    def __post_init__(self) -> None:
        self.seed = int(self.seed) & _MASK64
        self.counter = int(self.counter) & _MASK64

    def _next_generator(self) -> np.random.Generator:
        bitgen = np.random.Philox(key=self.seed, counter=[0, self.counter, 0, 0])
        self.counter = (self.counter + 1) & _MASK64
        return np.random.Generator(bitgen)

    def split(self, label: str) -> "RngStream":
        """Derive an independent child stream named by *label*.

        The child depends on ``(seed, label)`` only, never on how many draws
        the parent has made.
        """
        spawn_key = tuple(zlib.crc32(part.encode("utf-8")) for part in label.split("/"))
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=spawn_key)
        return RngStream(seed=int(seq.generate_state(1, dtype=np.uint64)[0]))

    def random(self, size: Shape) -> np.ndarray:
        return self._next_generator().random(size)

    def uniform(self, low: float, high: float, size: Shape) -> np.ndarray:
        return self._next_generator().uniform(low, high, size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size: Optional[Shape] = None) -> np.ndarray:
        return self._next_generator().normal(loc, scale, size)

    def integers(self, low: int, high: int, size: Optional[Shape] = None) -> np.ndarray:
        return self._next_generator().integers(low, high, size)

    def choice(self, n: int, size: int, replace: bool = True) -> np.ndarray:
        return self._next_generator().choice(n, size=size, replace=replace)

    def permutation(self, n: int) -> np.ndarray:
        return self._next_generator().permutation(n)

    def to_dict(self) -> dict[str, int]:
        return {"seed": self.seed, "counter": self.counter}

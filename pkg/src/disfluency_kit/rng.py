"""Deterministic, platform-independent randomness.

All sampling in the toolkit flows from one top-level seed through named
substreams. A substream seed is a keyed hash of (seed, name parts), so two
substreams never depend on draw order, and per-item substreams (one per
augmentation sample, one per synthesis job) make outputs independent of
iteration or insertion order. The generator itself is SplitMix64: pure 64-bit
integer arithmetic, identical output on every platform and Python build.
"""

import hashlib
import struct

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """64-bit SplitMix64 generator with inclusive-range integer sampling."""

    def __init__(self, seed: int):
        self.seed = seed & _MASK64
        self._state = seed & _MASK64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive. Rejection sampling
        keeps the draw unbiased for ranges that do not divide 2**64."""
        if lo > hi:
            raise ValueError(f"empty range [{lo}, {hi}]")
        n = hi - lo + 1
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return lo + (u % n)

    def random(self) -> float:
        # 53-bit mantissa, uniform in [0, 1)
        return (self.next_u64() >> 11) * 2.0**-53

    def choice(self, seq):
        if not seq:
            raise ValueError("choice from empty sequence")
        return seq[self.randint(0, len(seq) - 1)]

    def sample_indices(self, population: int, k: int) -> list[int]:
        """k distinct indices from range(population), via partial Fisher-Yates."""
        if k > population:
            raise ValueError(f"cannot sample {k} from {population} without replacement")
        idx = list(range(population))
        for i in range(k):
            j = self.randint(i, population - 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k]

    def shuffle(self, xs: list) -> None:
        for i in range(len(xs) - 1, 0, -1):
            j = self.randint(0, i)
            xs[i], xs[j] = xs[j], xs[i]

    def weighted_choice(self, items: list, weights: list[float]):
        if len(items) != len(weights) or not items:
            raise ValueError("items and weights must be non-empty and equal length")
        if any(w < 0 for w in weights):
            raise ValueError("weights must be non-negative")
        total = 0.0
        for w in weights:
            total += w
        if total <= 0.0:
            raise ValueError("weights must sum to a positive value")
        r = self.random() * total
        acc = 0.0
        for item, w in zip(items, weights):
            acc += w
            if r < acc:
                return item
        return items[-1]  # guard against accumulated float error


def substream_seed(seed: int, *parts) -> int:
    """64-bit substream seed from a top-level seed and a name path.

    Keyed blake2b keeps substreams independent of each other and stable across
    platforms; parts are joined with a separator byte so ("ab",) and ("a", "b")
    hash differently.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(struct.pack("<Q", seed & _MASK64))
    for p in parts:
        h.update(b"\x1f")
        h.update(str(p).encode("utf-8"))
    return int.from_bytes(h.digest(), "big")


def substream(seed: int, *parts) -> SplitMix64:
    return SplitMix64(substream_seed(seed, *parts))

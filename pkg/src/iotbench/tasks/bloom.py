"""Bloom filter membership test (filter pattern, 1:0/1)."""

from __future__ import annotations

import math
from typing import Iterable, Optional

from .hashing import hash128

DEFAULT_BITS = 9586
DEFAULT_HASHES = 7


class BloomFilter:
    """Bit array with ``k`` probe positions from double hashing.

    Probe ``i`` of an element is ``h1 + i*h2 mod m`` where (h1, h2) are the
    halves of one 128-bit blake2b digest.
    """

    def __init__(self, m: int = DEFAULT_BITS, k: int = DEFAULT_HASHES, seed: int = 0) -> None:
        if m < 1 or k < 1:
            raise ValueError("m and k must be positive")
        self.m = m
        self.k = k
        self.seed = seed
        self.bits = bytearray((m + 7) // 8)
        self.inserted = 0

    @classmethod
    def for_capacity(cls, n: int, fpr: float = 0.01, seed: int = 0) -> "BloomFilter":
        m = max(8, math.ceil(-n * math.log(fpr) / math.log(2) ** 2))
        k = max(1, round(m / n * math.log(2)))
        return cls(m, k, seed)

    def _positions(self, item) -> list[int]:
        h1, h2 = hash128(item, self.seed)
        h2 |= 1
        m = self.m
        return [(h1 + i * h2) % m for i in range(self.k)]

    def add(self, item) -> None:
        bits = self.bits
        for p in self._positions(item):
            bits[p >> 3] |= 1 << (p & 7)
        self.inserted += 1

    def update(self, items: Iterable) -> None:
        for it in items:
            self.add(it)

    def __contains__(self, item) -> bool:
        bits = self.bits
        for p in self._positions(item):
            if not bits[p >> 3] & (1 << (p & 7)):
                return False
        return True

    def expected_fpr(self, n: Optional[int] = None) -> float:
        n = self.inserted if n is None else n
        return (1.0 - math.exp(-self.k * n / self.m)) ** self.k


class BloomFilterTask:
    """Pass members of a pre-loaded reference set, drop everything else.

    ``field`` names the attribute to test; ``key_fn`` may map a message to the
    membership key instead (used by the outlier filter on observation values).
    """

    def __init__(self, bloom: BloomFilter, field: str = "value", key_fn=None, counters=None) -> None:
        self.bloom = bloom
        self.field = field
        self.key_fn = key_fn
        self.counters = counters if counters is not None else {}
        self.passed = 0
        self.dropped = 0

    def process(self, msg, emit) -> None:
        key = self.key_fn(msg) if self.key_fn is not None else msg.fields.get(self.field)
        if key is not None and key in self.bloom:
            self.passed += 1
            emit(msg)
        else:
            self.dropped += 1


def bloom_insert_and_test(state: BloomFilter, message, field: str) -> bool:
    """True when the message passes (its field is a probable member)."""
    return message.fields.get(field) in state

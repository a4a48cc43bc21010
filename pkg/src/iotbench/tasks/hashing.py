from __future__ import annotations

import hashlib

MERSENNE_31 = (1 << 31) - 1


def _bytes(value) -> bytes:
    if isinstance(value, bytes):
        return value
    return str(value).encode("utf-8")


def hash64(value, seed: int = 0) -> int:
    """Seeded 64-bit hash, stable across processes and platforms."""
    key = seed.to_bytes(8, "little", signed=False) if seed else b""
    return int.from_bytes(hashlib.blake2b(_bytes(value), digest_size=8, key=key).digest(), "little")


def hash128(value, seed: int = 0) -> tuple[int, int]:
    key = seed.to_bytes(8, "little", signed=False) if seed else b""
    d = hashlib.blake2b(_bytes(value), digest_size=16, key=key).digest()
    return int.from_bytes(d[:8], "little"), int.from_bytes(d[8:], "little")

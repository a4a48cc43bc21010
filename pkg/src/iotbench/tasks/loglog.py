"""LogLog distinct-count sketch (Durand & Flajolet), transform 1:1, stateful."""

from __future__ import annotations

import math
from functools import lru_cache

from .hashing import hash64

DEFAULT_LOG2M = 10


@lru_cache(maxsize=None)
def alpha(m: int) -> float:
    """Bias-correction constant for the geometric-mean estimator.

    Closed form (Gamma(-1/m) * (1 - 2^(1/m)) / ln 2)^(-m); tends to 0.39701.
    """
    return (math.gamma(-1.0 / m) * (1.0 - 2.0 ** (1.0 / m)) / math.log(2.0)) ** (-m)


class LogLog:
    """m = 2^b max-rank registers over a 64-bit hash.

    Estimate is ``alpha_m * m * 2^(mean register)``. Below ``2.5*m`` with any
    empty register, linear counting ``m*ln(m/V)`` is used instead, which also
    makes an empty sketch report 0.
    """

    def __init__(self, b: int = DEFAULT_LOG2M, seed: int = 0) -> None:
        if not 4 <= b <= 16:
            raise ValueError("b must be in [4, 16]")
        self.b = b
        self.m = 1 << b
        self.seed = seed
        self.registers = [0] * self.m
        self.alpha = alpha(self.m)
        self._sum = 0
        self._empty = self.m
        self._mask = self.m - 1
        self._max_rank = 64 - b + 1

    def add(self, item) -> None:
        h = hash64(item, self.seed)
        idx = h & self._mask
        w = h >> self.b
        rank = (w & -w).bit_length() if w else self._max_rank
        old = self.registers[idx]
        if rank > old:
            self.registers[idx] = rank
            self._sum += rank - old
            if old == 0:
                self._empty -= 1

    def raw_estimate(self) -> float:
        return self.alpha * self.m * 2.0 ** (self._sum / self.m)

    def estimate(self) -> float:
        e = self.raw_estimate()
        if e < 2.5 * self.m and self._empty:
            return self.m * math.log(self.m / self._empty)
        return e


class DistinctCountTask:
    """Emit the running distinct-count estimate of ``field`` for every input."""

    def __init__(self, b: int = DEFAULT_LOG2M, field: str = "value", per_key: bool = False, seed: int = 0) -> None:
        self.b = b
        self.field = field
        self.per_key = per_key
        self.seed = seed
        self._single = LogLog(b, seed)
        self._by_key: dict = {}

    def process(self, msg, emit) -> None:
        if self.per_key:
            sk = self._by_key.get(msg.key)
            if sk is None:
                sk = self._by_key[msg.key] = LogLog(self.b, self.seed)
        else:
            sk = self._single
        sk.add(msg.fields.get(self.field))
        emit(msg.derive({"stat": "distinct", "estimate": sk.estimate()}))


def distinct_count(state: LogLog, message, field: str) -> float:
    state.add(message.fields.get(field))
    return state.estimate()

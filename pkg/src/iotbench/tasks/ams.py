"""AMS second frequency moment sketch (Alon, Matias, Szegedy)."""

from __future__ import annotations

import numpy as np

from .hashing import MERSENNE_31, hash64

DEFAULT_ROWS = 5
DEFAULT_COLS = 20


class AmsSketch:
    """t x b grid of signed counters.

    Each counter has its own degree-3 polynomial hash over GF(2^31 - 1), which
    is 4-wise independent; the low bit of the hash picks the +1/-1 sign. The
    estimate is the median over rows of the mean over columns of Z^2.
    """

    def __init__(self, rows: int = DEFAULT_ROWS, cols: int = DEFAULT_COLS, seed: int = 0) -> None:
        if rows < 1 or cols < 1:
            raise ValueError("rows and cols must be positive")
        self.rows, self.cols = rows, cols
        rng = np.random.default_rng([seed, 0xA35])
        self._coef = rng.integers(1, MERSENNE_31, size=(4, rows * cols), dtype=np.int64)
        self.z = np.zeros(rows * cols, dtype=np.int64)
        self.count = 0

    def signs(self, item) -> np.ndarray:
        x = np.int64(hash64(item) % MERSENNE_31)
        a3, a2, a1, a0 = self._coef
        h = (a3 * x + a2) % MERSENNE_31
        h = (h * x + a1) % MERSENNE_31
        h = (h * x + a0) % MERSENNE_31
        return 1 - 2 * (h & 1)

    def add(self, item, count: int = 1) -> None:
        self.z += count * self.signs(item)
        self.count += count

    def estimators(self) -> np.ndarray:
        z = self.z.astype(np.float64)
        return (z * z).reshape(self.rows, self.cols)

    def estimate(self) -> float:
        if self.count == 0:
            return 0.0
        return float(np.median(self.estimators().mean(axis=1)))


class SecondMomentTask:
    def __init__(self, rows: int = DEFAULT_ROWS, cols: int = DEFAULT_COLS, field: str = "value", seed: int = 0) -> None:
        self.sketch = AmsSketch(rows, cols, seed)
        self.field = field

    def process(self, msg, emit) -> None:
        self.sketch.add(msg.fields.get(self.field))
        emit(msg.derive({"stat": "f2", "estimate": self.sketch.estimate()}))


def second_moment(state: AmsSketch, message, field: str) -> float:
    state.add(message.fields.get(field))
    return state.estimate()

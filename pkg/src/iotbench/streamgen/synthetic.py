"""Synthetic streams whose rate follows a named distribution shape."""

from __future__ import annotations

import string
from typing import Iterator, Optional

import numpy as np

from ..runtime.model import Message
from .pacing import max_rate, pace
from .spec import (
    Bimodal,
    Burst,
    Normal,
    RateMode,
    Sawtooth,
    Schema,
    StreamSourceSpec,
    Uniform,
)

_ALPHABET = np.array(list(string.ascii_lowercase + string.digits))


def segment_rates(spec: StreamSourceSpec, duration: float, seed: int) -> np.ndarray:
    """Target rate (msg/s) for each segment of ``spec.segment_s`` seconds."""
    spec.check()
    seg = spec.segment_s
    n = max(1, int(np.ceil(duration / seg - 1e-9)))
    mids = (np.arange(n) + 0.5) * seg
    dist = spec.distribution or Uniform()
    rng = np.random.default_rng([seed, 0x5EED])
    if isinstance(dist, Uniform):
        rate = dist.rate if dist.rate is not None else spec.rate_mode.value
        rates = np.full(n, float(rate))
    elif isinstance(dist, Normal):
        rates = rng.normal(dist.mean, dist.std, n)
    elif isinstance(dist, Bimodal):
        first = rng.random(n) < dist.mix
        rates = np.where(
            first,
            rng.normal(dist.mean1, dist.std1, n),
            rng.normal(dist.mean2, dist.std2, n),
        )
    elif isinstance(dist, Sawtooth):
        phase = (mids % dist.period) / dist.period
        rates = dist.low + (dist.high - dist.low) * phase
    elif isinstance(dist, Burst):
        cycle = dist.burst_len + dist.gap
        rates = np.where((mids % cycle) < dist.burst_len, dist.peak, dist.base).astype(float)
    else:
        raise TypeError(f"unsupported distribution {dist!r}")
    return np.clip(rates, 0.0, None)


def emission_offsets(rates: np.ndarray, segment_s: float, duration: float) -> np.ndarray:
    """Evenly spaced emission times inside each segment.

    Fractional message counts carry into the next segment so the total over
    the run matches the integral of the rate curve.
    """
    out = []
    carry = 0.0
    for k, r in enumerate(rates):
        seg_start = k * segment_s
        seg_len = min(segment_s, duration - seg_start)
        if seg_len <= 0:
            break
        exact = r * seg_len + carry
        cnt = int(np.floor(exact))
        carry = exact - cnt
        if cnt:
            out.append(seg_start + (np.arange(cnt) + 0.5) * (seg_len / cnt))
    return np.concatenate(out) if out else np.zeros(0)


def _random_values(schema: Schema, rng: np.random.Generator, n: int, str_len: int) -> list[list]:
    cols = []
    for a in schema.attributes:
        if a.type == "int":
            cols.append(rng.integers(0, 1_000_000, n).tolist())
        elif a.type == "float":
            cols.append(np.round(rng.uniform(0, 1000, n), 3).tolist())
        elif a.type == "str":
            chars = _ALPHABET[rng.integers(0, len(_ALPHABET), (n, max(1, str_len)))]
            cols.append(["".join(row) for row in chars])
        else:  # timestamp columns are filled from the schedule
            cols.append([None] * n)
    return cols


def _str_budget(schema: Schema, payload_bytes: Optional[int]) -> int:
    """Characters per str column so that the mean row size meets the target."""
    n_str = sum(1 for a in schema.attributes if a.type == "str")
    if not payload_bytes or not n_str:
        return 8
    fixed = 0
    for a in schema.attributes:
        if a.type == "int":
            fixed += 6  # mean digit count of U[0, 1e6)
        elif a.type == "float":
            fixed += 7  # e.g. "123.456"
        elif a.type == "timestamp":
            fixed += 13
    fixed += len(schema.attributes) - 1  # separators
    return max(1, round((payload_bytes - fixed) / n_str))


class SyntheticSource:
    """Source task for a synthetic stream; bit-reproducible for a given seed."""

    def __init__(self, spec: StreamSourceSpec, duration: float, seed: int, base_time_ms: int = 0) -> None:
        spec.check()
        self.spec = spec
        self.duration = duration
        self.seed = seed
        self.base_time_ms = base_time_ms
        self.rates = segment_rates(spec, duration, seed)
        self.offsets = emission_offsets(self.rates, spec.segment_s, duration)
        self._str_len = _str_budget(spec.schema, spec.payload_bytes)

    def __len__(self) -> int:
        return len(self.offsets)

    def messages(self, start: int = 0, stop: Optional[int] = None, chunk: int = 4096) -> Iterator[Message]:
        stop = len(self.offsets) if stop is None else stop
        for lo in range(start, stop, chunk):
            yield from self._build(lo, min(stop, lo + chunk))

    def _build(self, i: int, j: int) -> list[Message]:
        # one generator per fixed-size block keeps any slice reproducible
        out = []
        block = 4096
        schema = self.spec.schema
        names = schema.names
        for b in range(i // block, (j - 1) // block + 1):
            b_lo, b_hi = b * block, min(len(self.offsets), (b + 1) * block)
            rng = np.random.default_rng([self.seed, b])
            cols = _random_values(schema, rng, b_hi - b_lo, self._str_len)
            for k in range(max(i, b_lo), min(j, b_hi)):
                et = self.base_time_ms + int(self.offsets[k] * 1000)
                row = {}
                for name, attr, col in zip(names, schema.attributes, cols):
                    row[name] = et if attr.type == "timestamp" else col[k - b_lo]
                out.append(Message(None, et, None, row))
        return out

    def run(self, ctx) -> None:
        n = len(self.offsets)
        lo = n * ctx.index // ctx.parallelism
        hi = n * (ctx.index + 1) // ctx.parallelism
        offs = self.offsets[lo:hi].tolist()
        pace(ctx, offs, lambda i, j: self._build(lo + i, lo + j))


def synthesize(spec: StreamSourceSpec, duration: float, seed: int) -> SyntheticSource:
    return SyntheticSource(spec, duration, seed)


class RandomIntegerSource:
    """Single-field integer tuples at max rate or a constant rate."""

    def __init__(
        self,
        rate_mode: RateMode = RateMode.max_rate(),
        seed: int = 0,
        low: int = 0,
        high: int = 1_000_000,
        total: Optional[int] = None,
        field_name: str = "value",
    ) -> None:
        problems = rate_mode.violations()
        if problems or rate_mode.kind == "scaled_timestamps":
            raise ValueError(problems or ["random integers need constant or max_rate"])
        self.rate_mode = rate_mode
        self.seed = seed
        self.low, self.high = low, high
        self.total = total
        self.field = field_name

    def _values(self, index: int):
        rng = np.random.default_rng([self.seed, index])
        while True:
            yield from rng.integers(self.low, self.high, 8192).tolist()

    def run(self, ctx) -> None:
        vals = self._values(ctx.index)
        name = self.field

        def make(i, j):
            return [Message(None, 0, None, {name: next(vals)}) for _ in range(j - i)]

        if self.rate_mode.kind == "max_rate":
            max_rate(ctx, make, total=self.total)
            return
        rate = self.rate_mode.value / ctx.parallelism
        n = self.total
        if n is None:
            # open-ended: schedule in chunks until stopped
            chunk = max(1, int(rate * 10))
            i = 0
            while not ctx.should_stop():
                offs = [(i + k) / rate for k in range(chunk)]
                sent = pace(ctx, offs, make)
                i += sent
                if sent < chunk:
                    break
            return
        pace(ctx, [k / rate for k in range(n)], make)


def random_integers(rate_mode: RateMode = RateMode.max_rate(), **kwargs) -> RandomIntegerSource:
    return RandomIntegerSource(rate_mode, **kwargs)

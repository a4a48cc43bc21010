"""Interval throughput and jitter."""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

DEFAULT_INTERVAL_S = 1.0


def compute_jitter(out_rate: float, sigma: float, in_rate: float, mean_in_rate: float) -> Optional[float]:
    """Normalized deviation of the output rate from ``sigma * in_rate``.

    Returns None (an undefined sample) when the long-run mean input rate is 0.
    """
    if not sigma > 0:
        raise ValueError(f"selectivity must be > 0, got {sigma}")
    if mean_in_rate == 0:
        return None
    return (out_rate - sigma * in_rate) / (sigma * mean_in_rate)


@dataclass(frozen=True)
class ThroughputSample:
    interval_start: float  # seconds since run start
    interval_len: float
    input_rate: float
    output_rate: float
    mean_input_rate: float


@dataclass(frozen=True)
class JitterSample:
    interval: int
    value: float


def _interval_counts(buckets: Mapping[int, int], origin: int, per: int, n: int) -> list[int]:
    out = [0] * n
    for b, c in buckets.items():
        k = (b - origin) // per
        if 0 <= k < n:
            out[k] += c
    return out


def throughput_series(
    emit_buckets: Mapping[int, int],
    arrival_buckets: Mapping[int, int],
    start_ns: int,
    stop_ns: int,
    bucket_ns: int,
    interval_s: float = DEFAULT_INTERVAL_S,
) -> list[ThroughputSample]:
    """Per-interval input/output rates over the whole intervals of [start, stop).

    Buckets are absolute clock indices of width ``bucket_ns``; the tail after
    the last whole interval and the post-stop drain are not sampled.
    """
    per = int(round(interval_s * 1e9 / bucket_ns))
    if per < 1:
        raise ValueError("interval shorter than the telemetry bucket")
    origin = start_ns // bucket_ns
    n = max(0, (stop_ns // bucket_ns - origin) // per)
    if n == 0:
        return []
    ins = _interval_counts(emit_buckets, origin, per, n)
    outs = _interval_counts(arrival_buckets, origin, per, n)
    length = per * bucket_ns / 1e9
    mean_in = sum(ins) / n / length
    return [
        ThroughputSample(k * length, length, ins[k] / length, outs[k] / length, mean_in)
        for k in range(n)
    ]


def jitter_series(samples: Sequence[ThroughputSample], sigma: float) -> list[JitterSample]:
    out = []
    for k, s in enumerate(samples):
        j = compute_jitter(s.output_rate, sigma, s.input_rate, s.mean_input_rate)
        if j is not None:
            out.append(JitterSample(k, j))
    return out


def median_abs(jitter: Sequence[JitterSample]) -> Optional[float]:
    if not jitter:
        return None
    return statistics.median(abs(j.value) for j in jitter)

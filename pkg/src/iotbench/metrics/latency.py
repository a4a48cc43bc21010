"""End-to-end latency records, summaries, and clock-skew correction."""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np

LOCAL = "local"
MAX_OFFSET_SPREAD_NS = 1_000_000  # offset estimates wider than 1 ms flag the run


@dataclass(frozen=True)
class LatencyRecord:
    msg_id: int
    source_ingress_time: int  # ns
    sink_arrival_time: int  # ns
    source_host: str = LOCAL
    sink_host: str = LOCAL

    @property
    def latency_ms(self) -> float:
        return (self.sink_arrival_time - self.source_ingress_time) / 1e6


@dataclass(frozen=True)
class LatencySummary:
    count: int
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float
    negative: int = 0
    unmatched: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


EMPTY_SUMMARY = LatencySummary(0, *([float("nan")] * 6))


def summarize_ms(latencies_ms, unmatched: int = 0) -> LatencySummary:
    """Quartiles use linear interpolation between order statistics.

    Negative values (residual clock skew) are counted and excluded.
    """
    arr = np.asarray(latencies_ms, dtype=np.float64)
    neg = int(np.count_nonzero(arr < 0))
    arr = arr[arr >= 0]
    if arr.size == 0:
        return replace(EMPTY_SUMMARY, negative=neg, unmatched=unmatched)
    q = np.quantile(arr, [0.0, 0.25, 0.5, 0.75, 1.0])
    return LatencySummary(int(arr.size), *(float(v) for v in q), float(arr.mean()), neg, unmatched)


def end_to_end_latency(records: Iterable, unmatched: int = 0) -> LatencySummary:
    """Summary of sink arrival minus source ingress, in milliseconds.

    Accepts LatencyRecord objects; records with no provenance (None ingress)
    are counted as unmatched and excluded.
    """
    lats = []
    for r in records:
        if r.source_ingress_time is None:
            unmatched += 1
            continue
        lats.append(r.latency_ms)
    return summarize_ms(lats, unmatched)


# clock skew -------------------------------------------------------------------


@dataclass(frozen=True)
class OffsetEstimate:
    offset_ns: int  # remote clock minus local clock
    rtt_ns: int
    spread_ns: int  # range of the estimates from the fastest half of the exchanges
    flagged: bool

    @property
    def residual_bound_ns(self) -> int:
        return self.rtt_ns // 2


def measure_offset(remote_clock: Callable[[], int], samples: int = 8,
                   local_clock: Callable[[], int] = time.monotonic_ns,
                   max_spread_ns: int = MAX_OFFSET_SPREAD_NS) -> OffsetEstimate:
    """Request/response midpoint estimate of a remote clock's offset.

    The exchange with the shortest round trip wins; its half round trip
    bounds the residual error.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    obs = []
    for _ in range(samples):
        t0 = local_clock()
        remote = remote_clock()
        t1 = local_clock()
        obs.append((t1 - t0, remote - (t0 + t1) // 2))
    obs.sort()
    best_rtt, best_off = obs[0]
    fast = [o for _, o in obs[: max(1, len(obs) // 2)]]
    spread = max(fast) - min(fast)
    return OffsetEstimate(best_off, best_rtt, spread, spread > max_spread_ns)


@dataclass
class SkewCorrection:
    records: list[LatencyRecord]
    negative: int
    residual_bound_ns: int


def skew_correct(records: Sequence[LatencyRecord], offsets_ns: Optional[Mapping[str, int]] = None,
                 residual_bound_ns: int = 0) -> SkewCorrection:
    """Shift every timestamp onto the reference clock.

    ``offsets_ns[host]`` is that host's clock minus the reference clock;
    hosts without an entry (and the default single-host case) are left as
    is. Records whose corrected latency is negative are counted.
    """
    offsets_ns = offsets_ns or {}
    out = []
    negative = 0
    for r in records:
        so = offsets_ns.get(r.source_host, 0)
        ko = offsets_ns.get(r.sink_host, 0)
        c = replace(r, source_ingress_time=r.source_ingress_time - so, sink_arrival_time=r.sink_arrival_time - ko)
        if c.sink_arrival_time < c.source_ingress_time:
            negative += 1
        out.append(c)
    return SkewCorrection(out, negative, residual_bound_ns)


def windowed_medians(ingress_ns, latency_ms, start_ns: int, window_s: float) -> list[float]:
    """Median latency of messages grouped by ingress window (stationarity check)."""
    ing = np.asarray(ingress_ns, dtype=np.int64)
    lat = np.asarray(latency_ms, dtype=np.float64)
    if ing.size == 0:
        return []
    idx = (ing - start_ns) // int(window_s * 1e9)
    out = []
    for k in range(int(idx.max()) + 1):
        sel = lat[idx == k]
        if sel.size:
            out.append(float(statistics.median(sel.tolist())))
    return out

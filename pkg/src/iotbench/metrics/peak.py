"""Peak sustained input rate of a micro-benchmark dataflow."""

from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from ..runtime.engine import run
from ..runtime.model import SOURCE, Dataflow
from .report import JITTER_THRESHOLD, build_report

log = logging.getLogger(__name__)

KEEP_UP_RATIO = 0.95


@dataclass
class ProbeResult:
    rate: float
    sustained: bool
    median_abs_jitter: Optional[float]
    queue_growth: bool
    emitted: int
    expected: int
    failures: dict = field(default_factory=dict)

    @property
    def kept_up(self) -> bool:
        return self.emitted >= KEEP_UP_RATIO * self.expected

    def reason(self) -> str:
        if self.failures:
            return "task failure"
        if not self.kept_up:
            return f"source fell behind ({self.emitted}/{self.expected})"
        if self.queue_growth:
            return "queue growth"
        if self.median_abs_jitter is None:
            return "no jitter samples"
        if self.median_abs_jitter > JITTER_THRESHOLD:
            return f"median |J| {self.median_abs_jitter:.3f}"
        return "ok"


@dataclass
class PeakResult:
    peak_rate: Optional[float]
    probes: list[ProbeResult]

    @property
    def sustainable(self) -> bool:
        return self.peak_rate is not None

    def diagnostics(self) -> list[str]:
        return [f"{p.rate:.1f} msg/s: {p.reason()}" for p in self.probes]


def with_rate(dataflow: Dataflow, rate: float, total: int) -> Dataflow:
    """Copy of ``dataflow`` whose data sources run at a constant ``rate`` for ``total`` messages."""
    df = copy.deepcopy(dataflow)
    data = [t for t in df.tasks if t.kind == SOURCE and not t.params.get("auxiliary")]
    for t in data:
        t.params = {**t.params, "rate": rate, "total": total}
    return df


def make_probe(dataflow: Dataflow, registry_fn: Callable[[Dataflow], dict], probe_s: float = 4.0,
               threshold: float = JITTER_THRESHOLD, **run_kw) -> Callable[[float], ProbeResult]:
    def probe(rate: float) -> ProbeResult:
        total = max(1, int(rate * probe_s))
        df = with_rate(dataflow, rate, total)
        handle = run(df, probe_s + 0.5, registry_fn(df), **run_kw)
        tel = handle.telemetry()
        rep = build_report(tel)
        # only count what the source managed inside the probe window
        window_end = tel.start_ns + int(probe_s * 1e9)
        emitted = sum(c for b, c in tel.emit_buckets.items() if b * tel.bucket_ns < window_end)
        res = ProbeResult(rate, False, rep.median_abs_jitter, rep.queue_growth, emitted,
                          total, dict(tel.failures))
        res.sustained = (not res.failures and res.kept_up and not res.queue_growth
                         and res.median_abs_jitter is not None and res.median_abs_jitter <= threshold)
        log.info("probe %.1f msg/s -> %s", rate, res.reason())
        return res

    return probe


def peak_rate_search(
    probe: Callable[[float], ProbeResult],
    *,
    start_rate: float = 500.0,
    min_rate: float = 1.0,
    max_rate: float = 1e6,
    tolerance: float = 0.05,
    max_probes: int = 24,
) -> PeakResult:
    """Exponential ramp from ``start_rate``, then bisection in log space.

    Stops once the bracketing rates are within ``tolerance`` (relative) of
    each other and reports the highest sustained rate.
    """
    probes: list[ProbeResult] = []

    def test(rate: float) -> bool:
        r = probe(rate)
        probes.append(r)
        return r.sustained

    lo: Optional[float] = None
    hi: Optional[float] = None
    rate = start_rate
    if test(rate):
        lo = rate
        while len(probes) < max_probes:
            nxt = lo * 2
            if nxt > max_rate:
                return PeakResult(lo, probes)
            if test(nxt):
                lo = nxt
            else:
                hi = nxt
                break
    else:
        hi = rate
        while len(probes) < max_probes:
            nxt = hi / 2
            if nxt < min_rate:
                return PeakResult(None, probes)
            if test(nxt):
                lo = nxt
                break
            hi = nxt
    if lo is None:
        return PeakResult(None, probes)
    while hi is not None and hi / lo > 1 + tolerance and len(probes) < max_probes:
        mid = math.sqrt(lo * hi)
        if test(mid):
            lo = mid
        else:
            hi = mid
    return PeakResult(lo, probes)

"""MetricsReport assembly and on-disk report files.

Everything here is a pure function of the saved telemetry, so writing a
report twice from the same telemetry gives byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..runtime.telemetry import Telemetry
from .charts import box_plot, series_chart
from .latency import LatencySummary, summarize_ms
from .selectivity import steady_state_selectivity
from .throughput import (
    DEFAULT_INTERVAL_S,
    JitterSample,
    ThroughputSample,
    jitter_series,
    median_abs,
    throughput_series,
)

JITTER_THRESHOLD = 0.05
QUEUE_GROWTH_SEGMENTS = 4
QUEUE_GROWTH_FLOOR = 50  # messages; smaller creep is treated as noise

REPORT_FILES = ("latency.csv", "throughput.csv", "jitter.csv", "resources.csv", "counts.csv", "queues.csv",
                "summary.json")


def queue_grows(samples, start_ns: int, stop_ns: int, segments: int = QUEUE_GROWTH_SEGMENTS,
                floor: int = QUEUE_GROWTH_FLOOR) -> bool:
    """True when the peak total queue depth rises in every segment of the window."""
    if stop_ns <= start_ns:
        return False
    span = (stop_ns - start_ns) / segments
    peaks = [0] * segments
    seen = [False] * segments
    for t, depths in samples:
        k = int((t - start_ns) // span)
        if 0 <= k < segments:
            peaks[k] = max(peaks[k], sum(depths.values()))
            seen[k] = True
    if not all(seen):
        return False
    rising = all(b > a for a, b in zip(peaks, peaks[1:]))
    return rising and peaks[-1] - peaks[0] >= floor


@dataclass
class MetricsReport:
    latency: LatencySummary
    throughput: list[ThroughputSample]
    jitter: list[JitterSample]
    resources: list[dict]
    queue_high_water: dict[str, int]
    task_counts: dict[str, dict]
    errors: dict[str, dict]
    sigma: Optional[float]
    median_abs_jitter: Optional[float]
    queue_growth: bool
    queues_bounded: bool
    peak_rate: Optional[float] = None
    warnings: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def stable(self) -> bool:
        return (self.median_abs_jitter is not None and self.median_abs_jitter <= JITTER_THRESHOLD
                and not self.queue_growth)

    @property
    def has_data(self) -> bool:
        return self.latency.count > 0 or any(s.output_rate > 0 for s in self.throughput)

    def summary(self) -> dict:
        return _clean({
            "latency_ms": self.latency.as_dict(),
            "sigma": self.sigma,
            "jitter": {"median_abs": self.median_abs_jitter, "intervals": len(self.jitter),
                       "threshold": JITTER_THRESHOLD},
            "throughput": {
                "intervals": len(self.throughput),
                "mean_input_rate": self.throughput[0].mean_input_rate if self.throughput else None,
                "mean_output_rate": (sum(s.output_rate for s in self.throughput) / len(self.throughput)
                                     if self.throughput else None),
            },
            "queues": {"high_water": self.queue_high_water, "growth": self.queue_growth,
                       "bounded": self.queues_bounded},
            "stable": self.stable,
            "peak_rate": self.peak_rate,
            "errors": self.errors,
            "warnings": self.warnings,
            "meta": self.meta,
        })


def _clean(v):
    if isinstance(v, float):
        return None if math.isnan(v) or math.isinf(v) else v
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return _clean(float(v))
    return v


def latencies_ms(tel: Telemetry) -> np.ndarray:
    ing = np.asarray(tel.latency_ingress, dtype=np.int64)
    arr = np.asarray(tel.latency_arrival, dtype=np.int64)
    return (arr - ing) / 1e6


def build_report(
    tel: Telemetry,
    *,
    sigma: Optional[float] = None,
    interval_s: float = DEFAULT_INTERVAL_S,
    peak_rate: Optional[float] = None,
    meta: Optional[dict] = None,
) -> MetricsReport:
    """Derive every metric from raw telemetry.

    ``sigma`` defaults to the steady-state selectivity of the recorded
    dataflow, using measured pass ratios for filters.
    """
    warnings: list[str] = []
    if sigma is None and "dataflow" in tel.meta:
        try:
            sigma = steady_state_selectivity(tel.meta["dataflow"], tel.task_stats,
                                             tel.meta.get("auxiliary_sources", ()))
        except ValueError as exc:
            warnings.append(f"selectivity unavailable: {exc}")
    stop = tel.sources_stopped_ns if tel.sources_stopped_ns is not None else (tel.end_ns or tel.start_ns)
    tp = throughput_series(tel.emit_buckets, tel.arrival_buckets, tel.start_ns, stop, tel.bucket_ns, interval_s)
    jit: list[JitterSample] = []
    if sigma is not None and sigma > 0:
        jit = jitter_series(tp, sigma)
    elif sigma is not None:
        warnings.append("selectivity is zero; jitter undefined")
    lat = summarize_ms(latencies_ms(tel), tel.unmatched)
    hw = {n: s["queue_high_water"] for n, s in sorted(tel.task_stats.items())}
    cap = tel.meta.get("queue_capacity")
    bounded = cap is None or all(v < cap for v in hw.values())
    growth = queue_grows(tel.queue_samples, tel.start_ns, stop)
    errors = {n: dict(sorted(s["errors"].items())) for n, s in sorted(tel.task_stats.items()) if s["errors"]}
    counts = {n: {k: s[k] for k in ("instances", "in_count", "out_count", "control_count")}
              for n, s in sorted(tel.task_stats.items())}
    if tel.total_emitted == 0 and tel.total_arrived == 0:
        warnings.append("no data")
    if tel.failures:
        warnings.append("task failures: " + ", ".join(sorted(tel.failures)))
    if lat.negative:
        warnings.append(f"{lat.negative} negative latencies after skew correction")
    if peak_rate is None:
        peak_rate = tel.meta.get("peak_rate")
    m = {k: v for k, v in tel.meta.items() if k not in ("dataflow", "peak_rate")}
    m.update(meta or {})
    return MetricsReport(
        latency=lat,
        throughput=tp,
        jitter=jit,
        resources=list(tel.resource_samples),
        queue_high_water=hw,
        task_counts=counts,
        errors=errors,
        sigma=sigma,
        median_abs_jitter=median_abs(jit),
        queue_growth=growth,
        queues_bounded=bounded,
        peak_rate=peak_rate,
        warnings=warnings,
        meta=m,
    )


def _f(x: float) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.6f}"


def _write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_report(report: MetricsReport, tel: Telemetry, outdir) -> list[Path]:
    """Write metric CSVs, summary.json and charts/ under ``outdir``."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    charts = out / "charts"
    charts.mkdir(exist_ok=True)
    files = []
    t0 = tel.start_ns
    order = sorted(range(len(tel.latency_ids)),
                   key=lambda i: (tel.latency_ingress[i], tel.latency_ids[i], tel.latency_arrival[i]))
    files.append(_write_csv(out / "latency.csv", ["msg_id", "ingress_s", "arrival_s", "latency_ms"], (
        [tel.latency_ids[i], _f((tel.latency_ingress[i] - t0) / 1e9), _f((tel.latency_arrival[i] - t0) / 1e9),
         _f((tel.latency_arrival[i] - tel.latency_ingress[i]) / 1e6)] for i in order)))
    files.append(_write_csv(out / "throughput.csv",
                            ["interval_start_s", "interval_len_s", "input_rate", "output_rate", "mean_input_rate"],
                            ([_f(s.interval_start), _f(s.interval_len), _f(s.input_rate), _f(s.output_rate),
                              _f(s.mean_input_rate)] for s in report.throughput)))
    files.append(_write_csv(out / "jitter.csv", ["interval", "jitter"],
                            ([j.interval, _f(j.value)] for j in report.jitter)))
    files.append(_write_csv(out / "resources.csv", ["timestamp_s", "host", "cpu_percent", "mem_percent"],
                            ([_f((r["timestamp"] - t0) / 1e9), r["host"], _f(r["cpu_percent"]), _f(r["mem_percent"])]
                             for r in report.resources)))
    files.append(_write_csv(out / "counts.csv",
                            # message counts only; timing-dependent queue peaks go to summary.json
                            ["task", "instances", "in_count", "out_count", "control_count", "errors"],
                            ([n, s["instances"], s["in_count"], s["out_count"], s["control_count"],
                              json.dumps(tel.task_stats[n]["errors"], sort_keys=True)]
                             for n, s in report.task_counts.items())))
    names = sorted({k for _, d in tel.queue_samples for k in d})
    files.append(_write_csv(out / "queues.csv", ["t_s"] + names,
                            ([_f((t - t0) / 1e9)] + [d.get(n, 0) for n in names] for t, d in tel.queue_samples)))
    summary = out / "summary.json"
    summary.write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    files.append(summary)

    lat = report.latency
    files.append(_chart(charts / "latency_box.svg", box_plot(
        {"end-to-end": (lat.min, lat.q1, lat.median, lat.q3, lat.max)}, "End-to-end latency", " ms")))
    files.append(_chart(charts / "throughput.svg", series_chart(
        {"input": [s.input_rate for s in report.throughput] or [0.0],
         "output": [s.output_rate for s in report.throughput] or [0.0]}, "Throughput (msg/s)")))
    js = [j.value for j in report.jitter] or [0.0]
    files.append(_chart(charts / "jitter.svg", series_chart({"jitter": js}, "Jitter")))
    jq = np.quantile(js, [0, 0.25, 0.5, 0.75, 1.0]).tolist()
    files.append(_chart(charts / "jitter_box.svg", box_plot({"jitter": jq}, "Jitter")))
    if report.resources:
        files.append(_chart(charts / "resources.svg", series_chart(
            {"cpu%": [r["cpu_percent"] for r in report.resources],
             "mem%": [r["mem_percent"] for r in report.resources]}, "Resource utilization")))
    return files


def _chart(path: Path, data: bytes) -> Path:
    path.write_bytes(data)
    return path


def emit_report(tel: Telemetry, outdir, **kwargs) -> tuple[MetricsReport, list[Path]]:
    report = build_report(tel, **kwargs)
    return report, write_report(report, tel, outdir)


def report_dict(report: MetricsReport) -> dict:
    d = asdict(report)
    d["stable"] = report.stable
    return _clean(d)

"""Latency, throughput, jitter and resource metrics computed from run telemetry."""

from .latency import (
    LatencyRecord,
    LatencySummary,
    OffsetEstimate,
    SkewCorrection,
    end_to_end_latency,
    measure_offset,
    skew_correct,
    summarize_ms,
    windowed_medians,
)
from .peak import PeakResult, ProbeResult, make_probe, peak_rate_search, with_rate
from .report import (
    JITTER_THRESHOLD,
    REPORT_FILES,
    MetricsReport,
    build_report,
    emit_report,
    queue_grows,
    write_report,
)
from .resources import ResourceSample, ResourceSampler
from .selectivity import steady_state_selectivity, task_input_rates
from .throughput import (
    JitterSample,
    ThroughputSample,
    compute_jitter,
    jitter_series,
    median_abs,
    throughput_series,
)

__all__ = [
    "JITTER_THRESHOLD",
    "REPORT_FILES",
    "JitterSample",
    "LatencyRecord",
    "LatencySummary",
    "MetricsReport",
    "OffsetEstimate",
    "PeakResult",
    "ProbeResult",
    "ResourceSample",
    "ResourceSampler",
    "SkewCorrection",
    "ThroughputSample",
    "build_report",
    "compute_jitter",
    "emit_report",
    "end_to_end_latency",
    "jitter_series",
    "make_probe",
    "measure_offset",
    "median_abs",
    "peak_rate_search",
    "queue_grows",
    "skew_correct",
    "steady_state_selectivity",
    "summarize_ms",
    "task_input_rates",
    "throughput_series",
    "windowed_medians",
    "with_rate",
]

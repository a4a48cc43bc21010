from __future__ import annotations

import math
import random
import statistics
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from iotbench.metrics import (
    REPORT_FILES,
    LatencyRecord,
    ProbeResult,
    build_report,
    compute_jitter,
    emit_report,
    end_to_end_latency,
    jitter_series,
    make_probe,
    measure_offset,
    median_abs,
    peak_rate_search,
    queue_grows,
    skew_correct,
    steady_state_selectivity,
    summarize_ms,
    task_input_rates,
    throughput_series,
    windowed_medians,
)
from iotbench.runtime import Telemetry, run
from iotbench.runtime.config import dataflow_to_dict
from iotbench.runtime.engine import BUCKET_NS
from iotbench.runtime.model import Dataflow, Edge, TaskDescriptor
from iotbench.tasks import registry_for
from iotbench.topologies import build_micro

SEC = 1_000_000_000


# jitter ------------------------------------------------------------------------


@pytest.mark.parametrize("out,sigma,inp,mean,expected", [
    (100, 1.0, 100, 100, 0.0),
    (110, 1.0, 100, 100, 0.1),
    (90, 1.0, 100, 100, -0.1),
    (10, 0.1, 100, 100, 0.0),
    (12, 0.1, 100, 100, 0.2),
    (300, 3.0, 100, 200, 0.0),
    (0, 1.0, 50, 100, -0.5),
])
def test_jitter_examples(out, sigma, inp, mean, expected):
    assert compute_jitter(out, sigma, inp, mean) == pytest.approx(expected, abs=1e-12)


def test_jitter_undefined_and_invalid():
    assert compute_jitter(5, 1.0, 0, 0) is None
    for bad in (0.0, -1.0, float("nan")):
        with pytest.raises(ValueError):
            compute_jitter(1, bad, 1, 1)


@settings(max_examples=300, deadline=None)
@given(
    ratio=st.floats(0, 20, allow_nan=False),
    mean=st.floats(1e-3, 1e6, allow_nan=False),
    sigma=st.floats(1e-3, 100, allow_nan=False),
    dev=st.floats(-2, 2, allow_nan=False),
)
def test_property_jitter_matches_oracle(ratio, mean, sigma, dev):
    # an interval's input rate is a bounded multiple of its own long-run mean
    inp = ratio * mean
    out = max(0.0, sigma * (inp + dev * mean))
    got = compute_jitter(out, sigma, inp, mean)
    want = oracles.jitter(out, sigma, inp, mean)
    assert abs(got - want) <= 1e-12 * max(1.0, abs(want))


@settings(max_examples=200, deadline=None)
@given(inp=st.floats(0, 1e6, allow_nan=False), mean=st.floats(1e-3, 1e6, allow_nan=False),
       sigma=st.sampled_from([0.1, 0.25, 0.5, 1.0, 2.0, 4.0]))
def test_property_ideal_output_is_zero_jitter(inp, mean, sigma):
    assert compute_jitter(sigma * inp, sigma, inp, mean) == 0.0


# throughput --------------------------------------------------------------------


def buckets(rate_per_s, seconds, start_bucket=0, per_s=SEC // BUCKET_NS):
    """Even emission at ``rate_per_s`` spread across ``seconds`` worth of buckets."""
    out = {}
    for b in range(seconds * per_s):
        n = (b + 1) * rate_per_s // per_s - b * rate_per_s // per_s
        if n:
            out[start_bucket + b] = n
    return out


def test_throughput_series_rates_and_tail():
    per_s = SEC // BUCKET_NS
    emit = buckets(1000, 5)
    arrive = buckets(500, 5)
    arrive[5 * per_s] = 999  # drain after stop: never sampled
    tp = throughput_series(emit, arrive, 0, int(4.5 * SEC), BUCKET_NS, 1.0)
    assert len(tp) == 4
    for k, s in enumerate(tp):
        assert s.interval_start == pytest.approx(k)
        assert s.input_rate == pytest.approx(1000)
        assert s.output_rate == pytest.approx(500)
        assert s.mean_input_rate == pytest.approx(1000)
    js = jitter_series(tp, 0.5)
    assert [j.value for j in js] == [0.0] * 4
    assert median_abs(js) == 0.0
    assert median_abs([]) is None


def test_throughput_series_rejects_sub_bucket_interval():
    with pytest.raises(ValueError):
        throughput_series({}, {}, 0, SEC, BUCKET_NS, BUCKET_NS / 1e9 / 10)


def test_throughput_series_offset_start():
    per_s = SEC // BUCKET_NS
    start = 1234 * BUCKET_NS
    emit = buckets(200, 3, start_bucket=1234)
    tp = throughput_series(emit, emit, start, start + 3 * SEC, BUCKET_NS, 0.5)
    assert len(tp) == 6 and all(s.input_rate == pytest.approx(200) for s in tp)
    assert per_s * BUCKET_NS == SEC


# latency -----------------------------------------------------------------------


def test_latency_two_values():
    s = summarize_ms([5.0, 15.0])
    assert (s.count, s.mean, s.median, s.min, s.max) == (2, 10.0, 10.0, 5.0, 15.0)


def test_latency_quartiles_match_oracle():
    rng = random.Random(3)
    xs = [rng.expovariate(0.1) for _ in range(1001)]
    s = summarize_ms(xs)
    qs = statistics.quantiles(xs, n=4, method="inclusive")
    assert (s.q1, s.median, s.q3) == pytest.approx(qs, rel=1e-12)
    assert s.mean == pytest.approx(oracles.mean(xs), rel=1e-12)


def test_latency_negative_and_unmatched():
    s = summarize_ms([-1.0, 2.0, 4.0], unmatched=3)
    assert (s.count, s.negative, s.unmatched, s.median) == (2, 1, 3, 3.0)
    empty = summarize_ms([])
    assert empty.count == 0 and math.isnan(empty.median)


def test_end_to_end_latency_from_records():
    recs = [LatencyRecord(i, i * 1_000_000, i * 1_000_000 + 4_000_000) for i in range(10)]
    recs.append(LatencyRecord(99, None, 5))
    s = end_to_end_latency(recs)
    assert s.count == 10 and s.median == pytest.approx(4.0) and s.unmatched == 1


def test_offset_estimate_and_skew_correction():
    local = [0]

    def local_clock():
        local[0] += 50_000  # 50 us per read
        return local[0]

    def remote_clock():
        return local[0] + 7_000_000 + 25_000  # 7 ms ahead, read mid-exchange

    est = measure_offset(remote_clock, samples=8, local_clock=local_clock)
    assert abs(est.offset_ns - 7_000_000) <= est.residual_bound_ns
    assert not est.flagged

    # sink host clock is 7 ms ahead of the source host: raw latencies overstate by 7 ms
    recs = [LatencyRecord(i, i * SEC, i * SEC + 3_000_000 + 7_000_000, "src", "snk") for i in range(5)]
    fixed = skew_correct(recs, {"snk": est.offset_ns}, est.residual_bound_ns)
    for r in fixed.records:
        assert abs(r.latency_ms - 3.0) <= est.residual_bound_ns / 1e6
    assert fixed.negative == 0
    flipped = skew_correct(recs, {"snk": 12_000_000})
    assert flipped.negative == 5
    assert skew_correct(recs).records == recs


def test_offset_spread_flags_noisy_clock():
    rng = random.Random(1)
    t = [0]

    def local_clock():
        t[0] += 1000
        return t[0]

    est = measure_offset(lambda: t[0] + rng.randrange(0, 10_000_000), samples=16, local_clock=local_clock)
    assert est.flagged


def test_windowed_medians():
    ing = [k * SEC // 10 for k in range(40)]
    lat = [1.0 if k < 20 else 3.0 for k in range(40)]
    assert windowed_medians(ing, lat, 0, 1.0) == [1.0, 1.0, 3.0, 3.0]
    assert windowed_medians([], [], 0, 1.0) == []


# queues ------------------------------------------------------------------------


def test_queue_growth_detection():
    rising = [(k * SEC // 10, {"a": k * 40}) for k in range(40)]
    flat = [(k * SEC // 10, {"a": 100 + (k % 3)}) for k in range(40)]
    assert queue_grows(rising, 0, 4 * SEC)
    assert not queue_grows(flat, 0, 4 * SEC)
    creeping = [(k * SEC // 10, {"a": k}) for k in range(40)]
    assert not queue_grows(creeping, 0, 4 * SEC)  # rises, but under the noise floor
    assert not queue_grows(rising[:5], 0, 4 * SEC)  # segments without samples


# selectivity -------------------------------------------------------------------


def test_steady_state_selectivity_micro():
    assert steady_state_selectivity(build_micro("AVG")) == pytest.approx(0.1)
    assert steady_state_selectivity(build_micro("KAL")) == pytest.approx(1.0)
    blf = build_micro("BLF")
    stats = {"blf": {"in_count": 1000, "out_count": 480}, "source": {"out_count": 1000}}
    assert steady_state_selectivity(blf, stats) == pytest.approx(0.48)


def test_input_rates_count_duplicate_fanout():
    df = Dataflow(
        [TaskDescriptor("source", "source"), TaskDescriptor("a", "transform", parallelism=3),
         TaskDescriptor("b", "transform"), TaskDescriptor("sink", "sink")],
        [Edge("source", "a", "duplicate"), Edge("source", "b"), Edge("a", "sink"), Edge("b", "sink")],
    )
    rates = task_input_rates(df)
    assert rates == {"a": 3.0, "b": 1.0, "sink": 4.0}


# reports -----------------------------------------------------------------------


def synthetic_telemetry(seconds=8, rate=1000, sigma=1.0, lat_ms=2.0, queue=lambda k: 10):
    emit = buckets(rate, seconds)
    arrive = buckets(int(rate * sigma), seconds)
    ids = list(range(0, seconds * rate, 97))
    ing = [i * SEC // rate for i in ids]
    arr = [t + int(lat_ms * 1e6) for t in ing]
    df = build_micro("KAL")
    return Telemetry(
        start_ns=0, sources_stopped_ns=seconds * SEC, end_ns=seconds * SEC + 1000, bucket_ns=BUCKET_NS,
        emit_buckets=emit, arrival_buckets=arrive,
        latency_ids=ids, latency_ingress=ing, latency_arrival=arr, latency_seen=len(ids), unmatched=0,
        task_stats={n: {"name": n, "instances": 1, "in_count": seconds * rate, "out_count": seconds * rate,
                        "control_count": 0, "queue_high_water": 12, "errors": {}} for n in ("source", "kal", "sink")},
        queue_samples=[(k * SEC // 10, {"kal": queue(k), "sink": 0}) for k in range(seconds * 10)],
        meta={"dataflow": dataflow_to_dict(df), "auxiliary_sources": [], "seed": 0, "queue_capacity": 10000},
    )


def test_report_from_ideal_telemetry_is_stable():
    rep = build_report(synthetic_telemetry())
    assert rep.sigma == pytest.approx(1.0)
    assert len(rep.throughput) == 8
    assert rep.median_abs_jitter == 0.0
    assert rep.latency.median == pytest.approx(2.0)
    assert rep.stable and rep.queues_bounded and rep.has_data
    assert rep.warnings == []


def test_report_flags_queue_growth_as_unstable():
    rep = build_report(synthetic_telemetry(queue=lambda k: 50 * k))
    assert rep.queue_growth and not rep.stable


def test_report_flags_lagging_output():
    rep = build_report(synthetic_telemetry(sigma=0.5), sigma=1.0)
    assert rep.median_abs_jitter == pytest.approx(0.5)
    assert not rep.stable


def test_empty_telemetry_is_flagged():
    tel = synthetic_telemetry()
    tel.emit_buckets, tel.arrival_buckets = {}, {}
    tel.latency_ids, tel.latency_ingress, tel.latency_arrival = [], [], []
    rep = build_report(tel)
    assert not rep.has_data and "no data" in rep.warnings
    assert rep.median_abs_jitter is None and not rep.stable


def test_report_files_deterministic(tmp_path):
    tel = synthetic_telemetry()
    saved = Telemetry.from_json(tel.to_json())
    _, a = emit_report(tel, tmp_path / "a")
    _, b = emit_report(saved, tmp_path / "b")
    names = sorted(p.relative_to(tmp_path / "a").as_posix() for p in a)
    assert set(REPORT_FILES) <= set(names)
    assert "charts/latency_box.svg" in names and "charts/jitter.svg" in names
    for p in a:
        q = tmp_path / "b" / p.relative_to(tmp_path / "a")
        assert p.read_bytes() == q.read_bytes(), p.name


def test_telemetry_format_version_checked():
    text = synthetic_telemetry().to_json().replace('"format_version":1', '"format_version":99')
    with pytest.raises(ValueError, match="format version"):
        Telemetry.from_json(text)


# peak search -------------------------------------------------------------------


def fake_probe(capacity):
    calls = []

    def probe(rate):
        calls.append(rate)
        ok = rate <= capacity
        j = 0.01 if ok else 0.3
        return ProbeResult(rate, ok, j, not ok, int(rate), int(rate))

    return probe, calls


@pytest.mark.parametrize("capacity", [37.0, 480.0, 3000.0, 25_000.0])
def test_peak_search_brackets_capacity(capacity):
    probe, calls = fake_probe(capacity)
    res = peak_rate_search(probe, start_rate=500, tolerance=0.05)
    assert res.sustainable
    assert capacity / 1.05 <= res.peak_rate <= capacity
    assert len(calls) <= 24
    assert all(p.sustained == (p.rate <= capacity) for p in res.probes)


def test_peak_search_limits():
    probe, _ = fake_probe(0.0)
    res = peak_rate_search(probe, start_rate=10, min_rate=1)
    assert res.peak_rate is None and not res.sustainable
    assert all("queue growth" in d for d in res.diagnostics())
    probe, _ = fake_probe(float("inf"))
    assert peak_rate_search(probe, start_rate=1000, max_rate=5000).peak_rate == 4000


def test_probe_reasons():
    assert ProbeResult(1, False, 0.01, False, 10, 100).reason().startswith("source fell behind")
    assert ProbeResult(1, False, 0.2, False, 100, 100).reason() == "median |J| 0.200"
    assert ProbeResult(1, False, None, False, 100, 100, {"t[0]": "x"}).reason() == "task failure"


# live runs ---------------------------------------------------------------------


def test_live_micro_report_regeneration_is_byte_identical(tmp_path):
    df = build_micro("AVG", rate=2000)
    handle = run(df, 3.0, registry_for(df), timeout=60, seed=4)
    tel = handle.telemetry()
    tel.save(tmp_path / "telemetry.json")
    rep, files = emit_report(tel, tmp_path / "r1")
    _, files2 = emit_report(Telemetry.load(tmp_path / "telemetry.json"), tmp_path / "r2")
    assert [f.read_bytes() for f in files] == [f.read_bytes() for f in files2]
    assert rep.sigma == pytest.approx(0.1)
    assert rep.has_data and rep.queues_bounded
    counts = rep.task_counts
    assert counts["avg"]["out_count"] == counts["avg"]["in_count"] // 10


def test_live_noop_runs_reproduce_counts():
    outs = []
    for _ in range(2):
        df = build_micro("XML", total=3000)
        h = run(df, None, registry_for(df), timeout=60, seed=11)
        outs.append({n: (s.in_count, s.out_count) for n, s in h.stats().items()})
    assert outs[0] == outs[1]
    assert outs[0]["sink"] == (3000, 0)


def test_sleep_task_peak_near_inverse_cost():
    """A 1 ms task sustains about 1000 msg/s on one instance."""
    df = Dataflow(
        [TaskDescriptor("source", "source", impl="random_integers", params={"high": 100}),
         TaskDescriptor("slow", "transform", impl="sleep", params={"seconds": 0.001}),
         TaskDescriptor("sink", "sink", impl="log_sink")],
        [Edge("source", "slow"), Edge("slow", "sink")],
    )
    probe = make_probe(df, registry_for, probe_s=2.0)
    res = peak_rate_search(probe, start_rate=250, tolerance=0.05)
    assert res.peak_rate is not None
    assert 800 <= res.peak_rate <= 1050, res.diagnostics()


def per_message_cost(code, n=10_000):
    df = build_micro(code, total=n)
    t0 = time.perf_counter()
    h = run(df, None, registry_for(df), timeout=120, seed=1)
    assert h.task_stats(code.lower()).in_count == n
    return (time.perf_counter() - t0) / n


def test_xml_parse_costlier_than_bloom():
    assert per_message_cost("XML") > per_message_cost("BLF")

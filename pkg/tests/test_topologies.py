from __future__ import annotations

import threading
import time

import pytest

import oracles
from iotbench.iobackends import ObjectStoreRef, Services
from iotbench.metrics import steady_state_selectivity
from iotbench.runtime import Edge, TaskDescriptor, run
from iotbench.runtime.config import ConfigError
from iotbench.runtime.model import HASH, SINK
from iotbench.streamgen import datasets
from iotbench.tasks import registry_for
from iotbench.tasks.models import ModelArtifact
from iotbench.topologies import (
    CATALOG,
    PROXY_CODES,
    build_app,
    build_micro,
    build_pred,
    build_stats,
    entry,
    fit_regression,
    fixture_tree,
    prepare_pred,
    publish_model,
    swap_model,
)

# code: (category, pattern, sigma, stateful)
EXPECTED = {
    "XML": ("Parse", "Transform", "1:1", False),
    "BLF": ("Filter", "Filter", "1:0/1", False),
    "AVG": ("Statistical", "Aggregate", "N:1", True),
    "DAC": ("Statistical", "Transform", "1:1", True),
    "KAL": ("Statistical", "Transform", "1:1", True),
    "SOM": ("Statistical", "Transform", "1:1", True),
    "DTC": ("Predictive", "Transform", "1:1", False),
    "MLR": ("Predictive", "Transform", "1:1", False),
    "SLR": ("Predictive", "Flat Map", "N:M", True),
    "ABD": ("IO", "Source/Transform", "1:1", False),
    "ABU": ("IO", "Sink", "1:1", False),
    "ATQ": ("IO", "Source/Transform", "1:1", False),
    "MQP": ("IO", "Sink", "1:1", False),
}


def test_catalog_has_exactly_the_expected_codes():
    assert list(CATALOG) == list(EXPECTED)


@pytest.mark.parametrize("code", list(EXPECTED))
def test_catalog_entry(code):
    e = entry(code)
    assert (e.category, e.pattern, e.sigma, e.stateful) == EXPECTED[code]
    assert e.descriptor().stateful == e.stateful


def test_entry_lookup():
    assert entry("avg") is CATALOG["AVG"]
    with pytest.raises(KeyError, match="unknown task code"):
        entry("FOO")


@pytest.mark.parametrize("code", list(EXPECTED))
def test_micro_structure(code):
    df = build_micro(code, rate=100, total=50, parallelism=2)
    assert [t.name for t in df.tasks] == ["source", code.lower(), "sink"]
    inbound = df.inbound(code.lower())[0]
    assert (inbound.routing == HASH) == CATALOG[code].stateful
    assert df.task("source").params["rate"] == 100
    assert df.task(code.lower()).parallelism == 2


# (gain check, expected out/in for a finite run of 2000 messages)
def _expected_out(code, n):
    if code == "AVG":
        return n // 10
    if code == "SLR":
        return n - 10 + 1
    return n


@pytest.mark.parametrize("code", list(EXPECTED))
def test_micro_selectivity_conformance(code):
    n = 2000
    df = build_micro(code, total=n)
    services = Services.memory()
    h = run(df, None, registry_for(df), timeout=60, services=services, seed=3)
    assert not h.failures
    s = h.task_stats(code.lower())
    assert s.in_count == n
    if code == "BLF":
        # values drawn from [0, 2000) against a [0, 1000) reference set: about half pass
        assert 0.4 * n < s.out_count < 0.65 * n
    else:
        assert s.out_count == _expected_out(code, n)
    assert h.task_stats("sink").in_count == s.out_count
    assert sum(s.errors.get(k, 0) for k in ("failed_ops", "not_found", "absent_row")) == 0


def test_micro_io_tasks_touch_their_backends():
    services = Services.memory()
    for code in ("ABU", "MQP"):
        df = build_micro(code, total=100)
        sub = services.broker.subscribe("#") if code == "MQP" else None
        run(df, None, registry_for(df), timeout=60, services=services)
        if sub is not None:
            assert len(sub.drain()) == 100
    assert len(services.objects.list("uploads")) == 100


# applications --------------------------------------------------------------------


def _edges(df):
    return {(e.src, e.dst): e for e in df.edges}


def test_stats_structure():
    df = build_stats("CITY", "x.csv")
    e = _edges(df)
    assert set(e) == {("source", "parse"), ("parse", "bloom"), ("bloom", "avg"), ("bloom", "kalman"),
                      ("bloom", "dac"), ("kalman", "slr"), ("avg", "publish"), ("slr", "publish"),
                      ("dac", "publish"), ("publish", "sink")}
    for branch in ("avg", "kalman", "dac", "slr"):
        assert e[next(k for k in e if k[1] == branch)].routing == HASH
    assert df.task("parse").kind == "flatmap"
    assert df.task("parse").selectivity.gain == len(datasets.descriptor("CITY").observations)


@pytest.mark.parametrize("ds,width", [("CITY", 90), ("TAXI", 10)])
def test_stats_average_window(ds, width):
    w = build_stats(ds, "x.csv").task("avg").window
    assert (w.mode, w.width, w.slide) == ("count", width, 1)


def test_pred_structure():
    df = build_pred("TAXI", "x.csv", scale=500)
    e = _edges(df)
    assert e[("model_download", "dtc")].routing == "duplicate"
    assert e[("model_download", "mlr")].routing == "duplicate"
    assert e[("dtc", "chart")].routing == HASH and e[("dtc", "chart")].hash_field == "stat"
    assert df.task("trigger").params["period_s"] == pytest.approx(60.0 / 500)
    assert df.task("trigger").params["auxiliary"]
    assert df.task("error").params["window"] == 10


def test_app_overrides_and_errors():
    df = build_app("stats", "CITY", "x.csv", parallelism={"kalman": 3}, params={"bloom": {"fpr": 0.05}})
    assert df.task("kalman").parallelism == 3
    assert df.task("bloom").params["fpr"] == 0.05
    with pytest.raises(KeyError):
        build_app("ETL", "CITY", "x.csv")
    with pytest.raises(ConfigError):
        build_app("STATS", "CITY", "x.csv", parallelism={"kalman": 0})


def test_proxy_codes_cover_every_app_task():
    for df in (build_stats("CITY", "x"), build_pred("CITY", "x")):
        for t in df.tasks:
            if t.kind not in ("source", "sink") and t.name not in ("error", "chart"):
                assert PROXY_CODES[t.name] in CATALOG
    assert "error" not in PROXY_CODES and "chart" not in PROXY_CODES


def test_stats_run_selectivity(taxi_1h):
    df = build_stats("TAXI", taxi_1h.csv_path)
    h = run(df, None, registry_for(df), timeout=120, services=Services.memory())
    assert not h.failures
    st = {n: s for n, s in h.stats().items()}
    n_obs = len(datasets.descriptor("TAXI").observations)
    assert st["parse"].out_count == n_obs * st["source"].out_count
    # every branch sees every filtered message
    for b in ("avg", "kalman", "dac"):
        assert st[b].in_count == st["bloom"].out_count
    assert st["publish"].in_count == st["avg"].out_count + st["slr"].out_count + st["dac"].out_count
    assert st["sink"].in_count == st["publish"].out_count
    stats = {n: {"in_count": s.in_count, "out_count": s.out_count} for n, s in st.items()}
    sigma = steady_state_selectivity(df, stats)
    assert sigma == pytest.approx(n_obs * st["bloom"].out_count / st["bloom"].in_count * 3)


def test_pred_run_uploads_charts(city_1h):
    services = Services.memory()
    prepare_pred(services, "CITY", city_1h.csv_path)
    df = build_pred("CITY", city_1h.csv_path)
    h = run(df, None, registry_for(df), timeout=120, services=services)
    assert not h.failures
    n = h.task_stats("source").out_count
    assert h.task_stats("dtc").out_count == n
    assert h.task_stats("mlr").out_count == n
    keys = services.objects.list("charts")
    assert len(keys) == 2 * (n // 100)
    assert {k.split("/")[1] for k in keys} == {"dtc", "error"}
    doc = services.objects.get(ObjectStoreRef("charts", keys[0]))
    assert doc.startswith(b"<svg") or doc.startswith(b"<?xml")


# models --------------------------------------------------------------------------


def test_fixture_tree_versions_flip_labels(city_1h):
    v1, v2, v3 = (fixture_tree("CITY", v) for v in (1, 2, 3))
    assert v1.tree == v3.tree and v1.tree != v2.tree
    assert v2.version == 2


def test_fit_regression_recovers_fixture_trend(city_1h):
    art = fit_regression("CITY", city_1h.csv_path)
    assert art.kind == "linear_regression" and len(art.coefficients) == len(art.features)
    assert ModelArtifact.loads(art.dumps()) == art


def test_prepare_and_publish_versions(city_1h):
    services = Services.memory()
    first = prepare_pred(services, "CITY", city_1h.csv_path)
    again = prepare_pred(services, "CITY", city_1h.csv_path)
    assert first == again
    art = publish_model(services, "dtc", fixture_tree("CITY", 1))
    assert art.version == 2
    assert publish_model(services, "dtc", fixture_tree("CITY", 1)).version == 3


def test_swap_model_rules():
    from iotbench.tasks import DecisionTreeTask

    t = DecisionTreeTask(fixture_tree("CITY", 1))
    assert swap_model(t, fixture_tree("CITY", 2))
    assert not swap_model(t, fixture_tree("CITY", 2))  # not newer
    assert not swap_model(t, fit_regression_stub())
    assert t.version == 2


def fit_regression_stub():
    from iotbench.tasks.models import linear_regression

    return linear_regression(9, 0.0, [1.0], ["temperature"])


def test_pred_hot_swap_flips_once(city_1h):
    """Every classification carries one model version; the label function changes exactly at the swap."""
    services = Services.memory()
    prepare_pred(services, "CITY", city_1h.csv_path)
    df = build_pred("CITY", city_1h.csv_path)
    df.tasks += [TaskDescriptor("tap_in", SINK, impl="collect_sink"),
                 TaskDescriptor("tap_out", SINK, impl="collect_sink")]
    df.edges += [Edge("parse", "tap_in"), Edge("dtc", "tap_out")]

    def flip():
        time.sleep(1.2)
        publish_model(services, "dtc", fixture_tree("CITY", 2))

    th = threading.Thread(target=flip)
    th.start()
    h = run(df, None, registry_for(df), timeout=120, services=services)
    th.join()
    rows = [m.fields for m in h.instances["tap_in"][0].impl.messages]
    outs = [m.fields for m in h.instances["tap_out"][0].impl.messages]
    assert len(rows) == len(outs) > 0
    versions = [o["model_version"] for o in outs]
    k = versions.index(2)
    assert set(versions[:k]) == {1} and set(versions[k:]) == {2}
    trees = {1: fixture_tree("CITY", 1).tree, 2: fixture_tree("CITY", 2).tree}
    for row, out in zip(rows, outs):
        assert out["label"] == oracles.tree_label(trees[out["model_version"]], row)
    swaps = h.instances["dtc"][0].impl.swap_log
    assert swaps == [(k, 2)]

"""STATS and PRED application dataflows, plus the fixture models PRED starts from."""

from __future__ import annotations

import csv
from typing import Optional

import numpy as np

from ..iobackends.objectstore import ObjectStoreRef
from ..runtime.model import (
    AGGREGATE,
    FILTER,
    FLATMAP,
    SINK,
    SOURCE,
    TRANSFORM,
    Dataflow,
    Edge,
    Selectivity,
    TaskDescriptor,
    WindowSpec,
)
from ..streamgen import datasets
from ..tasks.io import latest_model_key, upload_model
from ..tasks.models import ModelArtifact, decision_tree, linear_regression
from .catalog import checked

DEFAULT_SCALE = 1000.0
MODEL_CONTAINER = "models"
CHART_CONTAINER = "charts"
REFRESH_NATIVE_S = 60.0  # model refresh period in dataset time
BLOOM_FPR = 0.01
CHART_WINDOW = 100
SLR_WINDOW, SLR_HORIZON = 10, 1

# catalog entry whose measured peak stands in for each application task when sizing parallelism
PROXY_CODES = {"parse": "XML", "bloom": "BLF", "avg": "AVG", "kalman": "KAL", "slr": "SLR", "dac": "DAC",
               "publish": "MQP", "dtc": "DTC", "mlr": "MLR", "upload": "ABU", "model_download": "ABD"}


def _source(fixture: str, dataset: str, scale: float) -> TaskDescriptor:
    return TaskDescriptor("source", SOURCE, impl="replay",
                          params={"file": str(fixture), "dataset": dataset, "scale": scale, "emit_raw": True})


def _apply(df: Dataflow, parallelism: Optional[dict], params: Optional[dict]) -> Dataflow:
    for name, p in (parallelism or {}).items():
        df.task(name).parallelism = int(p)
    for name, extra in (params or {}).items():
        t = df.task(name)
        t.params = {**t.params, **extra}
    return checked(df)


def build_stats(dataset: str, fixture: str, *, scale: float = DEFAULT_SCALE, topic: Optional[str] = None,
                parallelism: Optional[dict] = None, params: Optional[dict] = None) -> Dataflow:
    """Parse, outlier filter, then three analytic branches merged into one publisher.

    ::

        source -> parse -> bloom -+-> avg ----------+
                                  +-> kalman -> slr -+-> publish -> sink
                                  +-> dac ----------+
    """
    d = datasets.descriptor(dataset)
    name = d.profile.name
    n_obs = len(d.observations)
    tasks = [
        _source(fixture, name, scale),
        TaskDescriptor("parse", FLATMAP, Selectivity.parse("1:N", n_obs), impl="observation_parse",
                       params={"dataset": name}),
        TaskDescriptor("bloom", FILTER, Selectivity.parse("1:0/1"), impl="bloom",
                       params={"dataset": name, "fpr": BLOOM_FPR, "observation_key": True}),
        TaskDescriptor("avg", AGGREGATE, Selectivity.parse("N:1", 1.0), stateful=True,
                       window=WindowSpec("count", d.stats_window, 1), impl="average", params={"field": "value"}),
        TaskDescriptor("kalman", TRANSFORM, stateful=True, impl="kalman", params={"field": "value"}),
        TaskDescriptor("slr", FLATMAP, Selectivity.parse("N:M", float(SLR_HORIZON)), stateful=True,
                       impl="sliding_regression", params={"window": SLR_WINDOW, "horizon": SLR_HORIZON}),
        TaskDescriptor("dac", TRANSFORM, stateful=True, impl="distinct_count", params={"per_key": True}),
        TaskDescriptor("publish", TRANSFORM, impl="publish", params={"topic": topic or f"stats/{name.lower()}"}),
        TaskDescriptor("sink", SINK, impl="log_sink"),
    ]
    edges = [
        Edge("source", "parse"),
        Edge("parse", "bloom"),
        Edge.hashed("bloom", "avg"),
        Edge.hashed("bloom", "kalman"),
        Edge.hashed("bloom", "dac"),
        Edge.hashed("kalman", "slr"),
        Edge("avg", "publish"),
        Edge("slr", "publish"),
        Edge("dac", "publish"),
        Edge("publish", "sink"),
    ]
    return _apply(Dataflow(tasks, edges, name=f"stats-{name}"), parallelism, params)


def build_pred(dataset: str, fixture: str, *, scale: float = DEFAULT_SCALE, refresh_s: Optional[float] = None,
               parallelism: Optional[dict] = None, params: Optional[dict] = None) -> Dataflow:
    """Parse, fork into classification and regression, estimate error, chart, upload.

    ::

        source -> parse -+-> dtc -----------------+-> chart -> upload -> sink
                         +-> mlr -> error -------+
        trigger -> model_download -> (dtc, mlr)   [control messages]

    ``refresh_s`` is the wall-clock refresh period; by default one minute of
    dataset time at the replay scale.
    """
    d = datasets.descriptor(dataset)
    name = d.profile.name
    period = refresh_s if refresh_s is not None else REFRESH_NATIVE_S / scale
    tasks = [
        _source(fixture, name, scale),
        TaskDescriptor("trigger", SOURCE, impl="trigger", params={"period_s": period, "auxiliary": True}),
        TaskDescriptor("model_download", FLATMAP, Selectivity.parse("1:N"), impl="model_download",
                       params={"dataset": name, "prefixes": ["dtc", "mlr"], "container": MODEL_CONTAINER}),
        TaskDescriptor("parse", TRANSFORM, impl="row_parse", params={"dataset": name}),
        TaskDescriptor("dtc", TRANSFORM, impl="decision_tree",
                       params={"dataset": name, "model_prefix": "dtc", "model_container": MODEL_CONTAINER}),
        TaskDescriptor("mlr", TRANSFORM, impl="linear_regression",
                       params={"dataset": name, "model_prefix": "mlr", "model_container": MODEL_CONTAINER}),
        TaskDescriptor("error", TRANSFORM, stateful=True, impl="error_estimate", params={"window": d.stats_window}),
        TaskDescriptor("chart", AGGREGATE, Selectivity.parse("N:1", 1.0 / CHART_WINDOW), stateful=True,
                       window=WindowSpec("count", CHART_WINDOW, CHART_WINDOW), impl="chart",
                       params={"window": CHART_WINDOW, "group_field": "stat",
                               "value_fields": {"dtc": "label", "error": "error"}}),
        TaskDescriptor("upload", TRANSFORM, impl="blob_upload",
                       params={"container": CHART_CONTAINER, "key_template": name.lower() + "/{group}/{seq:06d}.svg",
                               "data_field": "chart"}),
        TaskDescriptor("sink", SINK, impl="log_sink"),
    ]
    edges = [
        Edge("source", "parse"),
        Edge("parse", "dtc"),
        Edge("parse", "mlr"),
        Edge.hashed("mlr", "error"),
        Edge.hashed("dtc", "chart", "stat"),
        Edge.hashed("error", "chart", "stat"),
        Edge("chart", "upload"),
        Edge("upload", "sink"),
        Edge("trigger", "model_download"),
        # every instance must see each new model
        Edge("model_download", "dtc", "duplicate"),
        Edge("model_download", "mlr", "duplicate"),
    ]
    return _apply(Dataflow(tasks, edges, name=f"pred-{name}"), parallelism, params)


# fixture models ----------------------------------------------------------------

_TREES = {
    "CITY": {"attribute": "airquality_raw", "threshold": 40.0,
             "left": {"attribute": "dust", "threshold": 300.0, "left": {"label": "good"},
                      "right": {"label": "average"}},
             "right": {"attribute": "temperature", "threshold": 25.0, "left": {"label": "average"},
                       "right": {"label": "poor"}}},
    "TAXI": {"attribute": "trip_distance", "threshold": 2.0,
             "left": {"attribute": "fare_amount", "threshold": 10.0, "left": {"label": "cheap"},
                      "right": {"label": "standard"}},
             "right": {"attribute": "trip_time_in_secs", "threshold": 1200.0, "left": {"label": "standard"},
                       "right": {"label": "premium"}}},
}
_FLIP = {"good": "poor", "poor": "good", "cheap": "premium", "premium": "cheap"}


def _relabel(node: dict, mapping: dict) -> dict:
    if "label" in node:
        return {"label": mapping.get(node["label"], node["label"])}
    return {**node, "left": _relabel(node["left"], mapping), "right": _relabel(node["right"], mapping)}


def fixture_tree(dataset: str, version: int = 1) -> ModelArtifact:
    """Hand-set classifier; even versions swap the extreme classes so a swap is visible in the output."""
    d = datasets.descriptor(dataset)
    tree = _TREES[d.profile.name]
    if version % 2 == 0:
        tree = _relabel(tree, _FLIP)
    return decision_tree(version, tree, d.predictive["classifier_features"])


def fit_regression(dataset: str, fixture: str, version: int = 1) -> ModelArtifact:
    """Least-squares fit of the regression target on in-range fixture rows."""
    d = datasets.descriptor(dataset)
    feats = list(d.predictive["regression_features"])
    target = d.predictive["regression_target"]
    cols = feats + [target]
    rows = []
    with open(fixture, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            try:
                vals = [float(rec[c]) for c in cols]
            except (KeyError, ValueError):
                continue
            if all(d.valid_ranges[c][0] <= v <= d.valid_ranges[c][1] for c, v in zip(cols, vals)):
                rows.append(vals)
    if len(rows) <= len(feats):
        raise ValueError(f"{fixture}: not enough clean rows to fit a regression")
    a = np.asarray(rows)
    x = np.column_stack([np.ones(len(a)), a[:, :-1]])
    beta, *_ = np.linalg.lstsq(x, a[:, -1], rcond=None)
    return linear_regression(version, beta[0], beta[1:], feats, target)


def prepare_pred(services, dataset: str, fixture: str) -> dict[str, ModelArtifact]:
    """Upload version-1 models unless the store already holds some."""
    store = services.objects
    out = {}
    for prefix, make in (("dtc", lambda: fixture_tree(dataset, 1)), ("mlr", lambda: fit_regression(dataset, fixture))):
        found = latest_model_key(store, MODEL_CONTAINER, prefix)
        if found is None:
            art = make()
            upload_model(store, MODEL_CONTAINER, prefix, art)
        else:
            art = ModelArtifact.loads(store.get(ObjectStoreRef(MODEL_CONTAINER, found[1])))
        out[prefix] = art
    return out


def publish_model(services, prefix: str, artifact: ModelArtifact) -> ModelArtifact:
    """Store ``artifact`` as the next version under ``prefix``; running PRED picks it up on its next refresh."""
    found = latest_model_key(services.objects, MODEL_CONTAINER, prefix)
    art = artifact.with_version((found[0] if found else 0) + 1)
    upload_model(services.objects, MODEL_CONTAINER, prefix, art)
    return art


def swap_model(task, artifact: ModelArtifact) -> bool:
    """Install ``artifact`` on a live prediction task; False when the kind does not match."""
    return task.swap_model(artifact)

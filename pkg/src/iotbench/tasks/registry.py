"""Implementation lookup: ``impl`` names in dataflow documents to task factories.

A factory receives the per-instance :class:`InstanceContext` and the task
descriptor, and returns a fresh task object, so instances never share state.
"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional

from ..iobackends import ObjectStoreRef, TableQuerySpec
from ..runtime.model import Dataflow, TaskDescriptor, WindowSpec
from ..streamgen import datasets
from ..streamgen.replay import LoadedRows, ReplaySource, load_rows
from ..streamgen.spec import (
    Bimodal,
    Burst,
    Normal,
    RateMode,
    Sawtooth,
    Schema,
    StreamSourceSpec,
    Uniform,
)
from ..streamgen.synthetic import RandomIntegerSource, SyntheticSource
from .ams import SecondMomentTask
from .average import AverageTask
from .basic import CollectSink, Identity, LogSink, SleepTask
from .bloom import DEFAULT_BITS, DEFAULT_HASHES, BloomFilter, BloomFilterTask
from .chart import ChartTask
from .error import ErrorEstimateTask
from .io import (
    BlobDownloadTask,
    BlobUploadTask,
    ModelDownloadTask,
    PublishTask,
    TableQueryTask,
    TriggerSource,
    latest_model_key,
)
from .kalman import DEFAULT_Q, DEFAULT_R, KalmanTask
from .loglog import DEFAULT_LOG2M, DistinctCountTask
from .models import ModelArtifact
from .parse import ObservationParseTask, RowParseTask, XmlParseTask
from .predict import DecisionTreeTask, LinearRegressionTask
from .regression import SlidingRegressionTask

Factory = Callable[..., object]

IMPLEMENTATIONS: dict[str, Factory] = {}


def implementation(name: str):
    def register(fn: Factory) -> Factory:
        IMPLEMENTATIONS[name] = fn
        return fn

    return register


def registry_for(dataflow: Dataflow, extra: Optional[dict[str, Factory]] = None) -> dict[str, Callable]:
    """Task name -> factory(ctx) for every task in ``dataflow``.

    ``extra`` overrides or adds implementations by impl name (tests use it to
    plug in probes).
    """
    table = dict(IMPLEMENTATIONS)
    if extra:
        table.update(extra)
    out = {}
    for desc in dataflow.tasks:
        impl = desc.impl or desc.name
        if impl not in table:
            continue  # the engine reports unresolvable tasks at startup
        out[desc.name] = (lambda fn, d: (lambda ctx: fn(ctx, d)))(table[impl], desc)
    return out


def _services(ctx, what: str):
    svc = ctx.services
    if svc is None or getattr(svc, what, None) is None:
        raise ValueError(f"{ctx.task} needs a {what} backend but the run has no services configured")
    return getattr(svc, what)


# sources ---------------------------------------------------------------------


@implementation("random_integers")
def _random_integers(ctx, desc: TaskDescriptor):
    p = ctx.params
    rate = p.get("rate")
    mode = RateMode.constant(rate) if rate else RateMode.max_rate()
    return RandomIntegerSource(mode, seed=ctx.seed + 7919 * ctx.index, low=int(p.get("low", 0)),
                               high=int(p.get("high", 1_000_000)), total=p.get("total"))


@lru_cache(maxsize=8)
def _cached_rows(path: str, mtime: float, schema: Schema, delimiter: str) -> LoadedRows:
    return load_rows(path, schema, delimiter=delimiter)


def dataset_schema(p: dict) -> Schema:
    if "dataset" in p:
        return datasets.descriptor(p["dataset"]).schema
    return Schema.of(*[tuple(a) for a in p["schema"]], timestamp_column=p.get("timestamp_column"),
                     timestamp_format=p.get("timestamp_format", "epoch_ms"))


def rate_mode_from(p: dict) -> RateMode:
    if p.get("scale"):
        return RateMode.scaled(p["scale"])
    if p.get("rate"):
        return RateMode.constant(p["rate"])
    return RateMode.max_rate()


@implementation("replay")
def _replay(ctx, desc: TaskDescriptor):
    p = ctx.params
    schema = dataset_schema(p)
    path = str(Path(p["file"]))
    delimiter = p.get("delimiter", ",")
    spec = StreamSourceSpec("replay", rate_mode_from(p), schema, file=path, delimiter=delimiter,
                            emit_raw=bool(p.get("emit_raw", True)))
    rows = _cached_rows(path, Path(path).stat().st_mtime, schema, delimiter)
    return ReplaySource(spec, rows)


_DISTRIBUTIONS = {"uniform": Uniform, "normal": Normal, "bimodal": Bimodal, "sawtooth": Sawtooth, "burst": Burst}


@implementation("synthetic")
def _synthetic(ctx, desc: TaskDescriptor):
    p = dict(ctx.params)
    dist = dict(p.get("distribution", {"kind": "uniform"}))
    kind = dist.pop("kind")
    spec = StreamSourceSpec("synthetic", rate_mode_from(p), dataset_schema(p),
                            distribution=_DISTRIBUTIONS[kind](**dist), payload_bytes=p.get("payload_bytes"),
                            segment_s=float(p.get("segment_s", 1.0)))
    return SyntheticSource(spec, float(p["duration"]), ctx.seed)


@implementation("trigger")
def _trigger(ctx, desc: TaskDescriptor):
    return TriggerSource(float(ctx.params.get("period_s", 60.0)))


# plumbing --------------------------------------------------------------------


@implementation("identity")
def _identity(ctx, desc):
    return Identity()


@implementation("sleep")
def _sleep(ctx, desc):
    return SleepTask(float(ctx.params.get("seconds", 0.001)))


@implementation("log_sink")
def _log_sink(ctx, desc):
    return LogSink(int(ctx.params.get("every", 10_000)))


@implementation("collect_sink")
def _collect_sink(ctx, desc):
    return CollectSink(ctx.params.get("limit"))


# parse / filter --------------------------------------------------------------

SAMPLE_XML = (
    "<observation><timestamp>2015-01-27 12:00:00</timestamp><source>ci4lr75sl000a0000000000001</source>"
    "<longitude>77.580643</longitude><latitude>12.972442</latitude><temperature>23.4</temperature>"
    "<humidity>51.2</humidity><light>412.0</light><dust>312.55</dust><airquality_raw>41.02</airquality_raw>"
    "</observation>"
)


@implementation("xml_parse")
def _xml_parse(ctx, desc):
    p = ctx.params
    return XmlParseTask(p.get("field", "xml"), p.get("document", SAMPLE_XML), ctx.counters)


@implementation("observation_parse")
def _observation_parse(ctx, desc):
    d = datasets.descriptor(ctx.params["dataset"])
    return ObservationParseTask(d.schema, d.id_field, ctx.params.get("observations", d.observations),
                                ctx.params.get("delimiter", ","), ctx.counters)


@implementation("row_parse")
def _row_parse(ctx, desc):
    d = datasets.descriptor(ctx.params["dataset"])
    return RowParseTask(d.schema, d.id_field, ctx.params.get("delimiter", ","), ctx.counters)


@lru_cache(maxsize=8)
def _reference_items(path: Optional[str], dataset: Optional[str], lo: int, hi: int) -> tuple:
    if path:
        return tuple(datasets.load_reference_set(path))
    if dataset:
        return tuple(datasets.reference_set(dataset))
    return tuple(range(lo, hi))


@implementation("bloom")
def _bloom(ctx, desc):
    p = ctx.params
    lo, hi = p.get("reference_range", (0, 1000))
    items = _reference_items(p.get("reference_file"), p.get("dataset"), int(lo), int(hi))
    if p.get("fpr"):
        bloom = BloomFilter.for_capacity(len(items), float(p["fpr"]), seed=int(p.get("seed", 0)))
    else:
        bloom = BloomFilter(int(p.get("m", DEFAULT_BITS)), int(p.get("k", DEFAULT_HASHES)), int(p.get("seed", 0)))
    bloom.update(items)
    key_fn = None
    if p.get("observation_key"):
        def key_fn(msg):
            return datasets.bloom_key(msg.fields["obs"], msg.fields["value"])
    return BloomFilterTask(bloom, p.get("field", "value"), key_fn, ctx.counters)


# statistics ------------------------------------------------------------------


@implementation("average")
def _average(ctx, desc: TaskDescriptor):
    window = desc.window or WindowSpec("count", int(ctx.params.get("width", 10)), int(ctx.params.get("slide", 10)))
    return AverageTask(window, ctx.params.get("field", "value"), ctx.counters)


@implementation("distinct_count")
def _distinct(ctx, desc):
    p = ctx.params
    return DistinctCountTask(int(p.get("b", DEFAULT_LOG2M)), p.get("field", "value"), bool(p.get("per_key", False)),
                             int(p.get("seed", 0)))


@implementation("kalman")
def _kalman(ctx, desc):
    p = ctx.params
    return KalmanTask(float(p.get("q", DEFAULT_Q)), float(p.get("r", DEFAULT_R)), p.get("field", "value"),
                      float(p.get("x0", 0.0)), float(p.get("p0", 1.0)))


@implementation("second_moment")
def _second_moment(ctx, desc):
    p = ctx.params
    return SecondMomentTask(int(p.get("rows", 5)), int(p.get("cols", 20)), p.get("field", "value"),
                            int(p.get("seed", 0)))


@implementation("sliding_regression")
def _slr(ctx, desc):
    p = ctx.params
    return SlidingRegressionTask(int(p.get("window", 10)), int(p.get("horizon", 1)), p.get("field", "value"),
                                 p.get("t_field"), ctx.counters)


@implementation("error_estimate")
def _error(ctx, desc):
    return ErrorEstimateTask(int(ctx.params.get("window", 90)), ctx.counters)


@implementation("chart")
def _chart(ctx, desc):
    p = ctx.params
    return ChartTask(int(p.get("window", 100)), p.get("group_field", "group"), p.get("value_field", "value"),
                     p.get("value_fields"))


# prediction ------------------------------------------------------------------


def _load_model(ctx) -> ModelArtifact:
    p = ctx.params
    schema_fields = None
    if "dataset" in p:
        schema_fields = datasets.descriptor(p["dataset"]).schema.names
    if "model" in p:
        return ModelArtifact.from_dict(p["model"], schema_fields)
    if "model_file" in p:
        return ModelArtifact.load(p["model_file"], schema_fields)
    if "model_prefix" in p:
        store = _services(ctx, "objects")
        container = p.get("model_container", "models")
        found = latest_model_key(store, container, p["model_prefix"])
        if found is None:
            raise ValueError(f"no model under {container}/{p['model_prefix']}")
        return ModelArtifact.loads(store.get(ObjectStoreRef(container, found[1])), schema_fields)
    raise ValueError(f"{ctx.task}: no model configured (model, model_file or model_prefix)")


@implementation("decision_tree")
def _dtc(ctx, desc):
    return DecisionTreeTask(_load_model(ctx), ctx.counters)


@implementation("linear_regression")
def _mlr(ctx, desc):
    return LinearRegressionTask(_load_model(ctx), ctx.counters)


# io --------------------------------------------------------------------------


def _retry(p: dict) -> dict:
    return {k: p[k] for k in ("retries", "backoff_s") if k in p}


def object_keys(count: int) -> list[str]:
    return [f"obj{i:04d}.bin" for i in range(count)]


@implementation("blob_download")
def _blob_download(ctx, desc):
    p = ctx.params
    store = _services(ctx, "objects")
    container = p.get("container", "bench")
    keys = p.get("keys") or object_keys(int(p.get("objects", 16)))
    size = int(p.get("object_bytes", 1024))
    for i, key in enumerate(keys):  # idempotent fixture preload
        ref = ObjectStoreRef(container, key)
        if not store.exists(ref):
            store.put(ref, bytes((i + j) & 0xFF for j in range(size)))
    return BlobDownloadTask(store, container, keys, p.get("field", "value"), ctx.counters, _retry(p))


@implementation("blob_upload")
def _blob_upload(ctx, desc):
    p = ctx.params
    template = p.get("key_template", f"{ctx.task}-{ctx.index}/{{_n:08d}}.bin")
    return BlobUploadTask(_services(ctx, "objects"), p.get("container", "uploads"), template,
                          p.get("data_field", "data"), int(p.get("payload_bytes", 1024)), ctx.counters, _retry(p))


@implementation("table_query")
def _table_query(ctx, desc):
    p = ctx.params
    store = _services(ctx, "tables")
    table = p.get("table", "bench")
    rows = int(p.get("rows", 1000))
    partition = p.get("partition", "p0")
    store.create_table(table)
    if not store.query(TableQuerySpec(table, partition, str(rows - 1))):
        seed_rows = [(partition, str(i), {"v": i, "sq": i * i}) for i in range(rows)]
        bulk = getattr(store, "insert_many", None)
        if bulk is not None:
            bulk(table, seed_rows)
        else:
            for pk, rk, f in seed_rows:
                store.insert(table, pk, rk, f)
    return TableQueryTask(store, table, partition, rows, p.get("field", "value"), ctx.counters, _retry(p))


@implementation("publish")
def _publish(ctx, desc):
    p = ctx.params
    return PublishTask(_services(ctx, "broker"), p.get("topic", "iotbench"), ctx.counters, _retry(p))


@implementation("model_download")
def _model_download(ctx, desc):
    p = ctx.params
    schema_fields = datasets.descriptor(p["dataset"]).schema.names if "dataset" in p else None
    return ModelDownloadTask(_services(ctx, "objects"), p.get("container", "models"), p["prefixes"], ctx.counters,
                             schema_fields, _retry(p))

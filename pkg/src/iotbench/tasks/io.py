"""IO tasks over the pluggable backends (blob download/upload, table query, publish)."""

from __future__ import annotations

import json
import re
from typing import Optional, Sequence

from ..iobackends import (
    BackendError,
    ObjectNotFound,
    ObjectStoreRef,
    PubSubMessage,
    TableQuerySpec,
    with_retries,
)
from ..runtime.model import Message
from .models import ModelArtifact, ModelError


def _bump(counters, name: str) -> None:
    counters[name] = counters.get(name, 0) + 1


def _pick(keys: Sequence[str], msg, field: str) -> str:
    v = msg.fields.get(field)
    if isinstance(v, int) and not isinstance(v, bool):
        return keys[v % len(keys)]
    return str(v) if v is not None else keys[0]


class BlobDownloadTask:
    """One download per input; the object is chosen by ``field`` (an index or a key)."""

    def __init__(self, store, container: str, keys: Sequence[str], field: str = "value",
                 counters=None, retry: Optional[dict] = None) -> None:
        if not keys:
            raise ValueError("need at least one object key")
        self.store = store
        self.container = container
        self.keys = list(keys)
        self.field = field
        self.counters = counters if counters is not None else {}
        self.retry = retry or {}

    def process(self, msg, emit) -> None:
        ref = ObjectStoreRef(self.container, _pick(self.keys, msg, self.field))
        try:
            data = with_retries(lambda: self.store.get(ref), counters=self.counters, **self.retry)
        except ObjectNotFound:
            _bump(self.counters, "not_found")
            return
        except BackendError:
            _bump(self.counters, "failed_ops")
            return
        emit(msg.derive({"container": ref.container, "key": ref.key, "bytes": len(data), "data": data}))


class BlobUploadTask:
    """Upload ``data_field`` bytes to ``container``/``key_template``; emits an ack.

    ``key_template`` is formatted with the message fields, so e.g.
    ``"{group}/{seq:06d}.svg"`` files chart documents per group.
    """

    def __init__(self, store, container: str, key_template: str = "{_n:08d}.bin", data_field: str = "data",
                 payload_bytes: int = 0, counters=None, retry: Optional[dict] = None) -> None:
        self.store = store
        self.container = container
        self.key_template = key_template
        self.data_field = data_field
        self.payload = b"\x00" * payload_bytes
        self.counters = counters if counters is not None else {}
        self.retry = retry or {}
        self.uploaded = 0

    def process(self, msg, emit) -> None:
        data = msg.fields.get(self.data_field, self.payload)
        if isinstance(data, str):
            data = data.encode("utf-8")
        elif not isinstance(data, (bytes, bytearray)):
            data = self.payload if self.payload else str(data).encode("utf-8")
        key = self.key_template.format(_n=self.uploaded, **{k: v for k, v in msg.fields.items() if k != "_n"})
        ref = ObjectStoreRef(self.container, key)
        try:
            with_retries(lambda: self.store.put(ref, bytes(data)), counters=self.counters, **self.retry)
        except BackendError:
            _bump(self.counters, "failed_ops")
            return
        self.uploaded += 1
        emit(msg.derive({"container": ref.container, "key": key, "bytes": len(data)}))


class TableQueryTask:
    """Look up one row per input. The partition/row keys come from fields or from ``value``.

    With integer inputs the row key is ``value % rows`` inside ``partition``.
    """

    def __init__(self, store, table: str, partition: str = "p0", rows: int = 1000, field: str = "value",
                 counters=None, retry: Optional[dict] = None) -> None:
        self.store = store
        self.table = table
        self.partition = partition
        self.rows = rows
        self.field = field
        self.counters = counters if counters is not None else {}
        self.retry = retry or {}

    def process(self, msg, emit) -> None:
        f = msg.fields
        if "partition_key" in f:
            spec = TableQuerySpec(self.table, str(f["partition_key"]), f.get("row_key"))
        else:
            spec = TableQuerySpec(self.table, self.partition, str(int(f[self.field]) % self.rows))
        try:
            row = with_retries(lambda: self.store.query(spec), counters=self.counters, **self.retry)
        except BackendError:
            _bump(self.counters, "failed_ops")
            return
        if not row:
            _bump(self.counters, "absent_row")
        out = dict(row)
        out["_pk"], out["_rk"] = spec.partition_key, spec.row_key
        emit(msg.derive(out))


_ENCODER = json.JSONEncoder(sort_keys=True, separators=(",", ":"), default=str)


def encode_payload(fields: dict) -> bytes:
    return _ENCODER.encode(fields).encode("utf-8")


class PublishTask:
    """Publish each input as a JSON document on a topic; emits an ack for the logging sink.

    ``topic`` may reference fields, e.g. ``"stats/{stat}"`` for one topic per branch.
    """

    def __init__(self, broker, topic: str = "iotbench", counters=None, retry: Optional[dict] = None) -> None:
        self.broker = broker
        self.topic = topic
        self.counters = counters if counters is not None else {}
        self.retry = retry or {}
        self._dynamic = "{" in topic

    def process(self, msg, emit) -> None:
        topic = self.topic.format(**msg.fields) if self._dynamic else self.topic
        payload = encode_payload({"key": msg.key, **msg.fields} if msg.key is not None else msg.fields)
        out = PubSubMessage(topic, payload)
        try:
            with_retries(lambda: self.broker.publish(out), counters=self.counters, **self.retry)
        except (BackendError, OSError):
            _bump(self.counters, "failed_ops")
            return
        emit(msg.derive({"topic": topic, "bytes": len(payload)}))


_VERSION_KEY = re.compile(r"v(\d+)\.json$")


def model_key(prefix: str, version: int) -> str:
    return f"{prefix}/v{version:06d}.json"


def upload_model(store, container: str, prefix: str, artifact: ModelArtifact) -> ObjectStoreRef:
    ref = ObjectStoreRef(container, model_key(prefix, artifact.version))
    store.put(ref, artifact.dumps().encode("utf-8"))
    return ref


def latest_model_key(store, container: str, prefix: str) -> Optional[tuple[int, str]]:
    best = None
    for key in store.list(container, prefix + "/"):
        m = _VERSION_KEY.search(key)
        if m:
            v = int(m.group(1))
            if best is None or v > best[0]:
                best = (v, key)
    return best


class ModelDownloadTask:
    """On every trigger, fetch the newest artifact under each prefix and forward it in-band.

    Artifacts go downstream as control messages; prediction tasks install
    those of their own kind. A version is forwarded only once.
    """

    def __init__(self, store, container: str, prefixes: Sequence[str], counters=None,
                 schema_fields: Optional[list[str]] = None, retry: Optional[dict] = None) -> None:
        self.store = store
        self.container = container
        self.prefixes = list(prefixes)
        self.counters = counters if counters is not None else {}
        self.schema_fields = schema_fields
        self.retry = retry or {}
        self.sent: dict[str, int] = {}

    def process(self, msg, emit) -> None:
        for prefix in self.prefixes:
            try:
                found = with_retries(lambda: latest_model_key(self.store, self.container, prefix),
                                     counters=self.counters, **self.retry)
                if found is None or found[0] <= self.sent.get(prefix, -1):
                    continue
                raw = with_retries(lambda: self.store.get(ObjectStoreRef(self.container, found[1])),
                                   counters=self.counters, **self.retry)
                art = ModelArtifact.loads(raw, self.schema_fields)
            except ModelError:
                _bump(self.counters, "invalid_model")
                continue
            except BackendError:
                _bump(self.counters, "failed_ops")
                continue
            self.sent[prefix] = found[0]
            _bump(self.counters, "models_forwarded")
            emit(Message(None, msg.event_time, msg.ingress_time, {"model": prefix, "version": art.version},
                         prefix, control=art))


class TriggerSource:
    """Emits a control tick every ``period_s`` seconds of wall clock, starting at once.

    Auxiliary: it does not keep a run alive once the data sources finish.
    """

    auxiliary = True

    def __init__(self, period_s: float) -> None:
        if period_s <= 0:
            raise ValueError("period must be > 0")
        self.period_s = period_s
        self.ticks = 0

    def run(self, ctx) -> None:
        while not ctx.should_stop():
            ctx.emit_control([Message(None, 0, None, {"tick": self.ticks}, control="tick")])
            self.ticks += 1
            if ctx.wait(self.period_s):
                break

"""Pluggable external services: object store, table store, publish/subscribe."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .errors import (
    BackendError,
    BackendUnavailable,
    ObjectNotFound,
    TableNotFound,
    with_retries,
)
from .mqtt import MqttPublisher, MqttSubscriber
from .objectstore import LocalObjectStore, MemoryObjectStore, ObjectStore, ObjectStoreRef
from .pubsub import AT_MOST_ONCE, InProcessBroker, PubSubMessage, Subscription, topic_matches
from .tablestore import MemoryTableStore, SqliteTableStore, TableQuerySpec, TableStore


def blob_download(store: ObjectStore, ref: ObjectStoreRef, **retry) -> bytes:
    return with_retries(lambda: store.get(ref), **retry)


def blob_upload(store: ObjectStore, ref: ObjectStoreRef, data: bytes, **retry) -> bool:
    with_retries(lambda: store.put(ref, data), **retry)
    return True


def table_query(store: TableStore, spec: TableQuerySpec, **retry) -> dict:
    return with_retries(lambda: store.query(spec), **retry)


def publish(broker, msg: PubSubMessage, **retry) -> bool:
    return with_retries(lambda: broker.publish(msg), **retry)


@dataclass
class Services:
    """The backends a run talks to, shared by every task instance."""

    objects: Any = field(default_factory=MemoryObjectStore)
    tables: Any = field(default_factory=MemoryTableStore)
    broker: Any = field(default_factory=InProcessBroker)

    @classmethod
    def memory(cls) -> "Services":
        return cls()

    @classmethod
    def local(cls, root, broker: Optional[Any] = None) -> "Services":
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        return cls(LocalObjectStore(root / "objects"), SqliteTableStore(root / "tables.sqlite3"),
                   broker if broker is not None else InProcessBroker())

    def close(self) -> None:
        for backend in (self.tables, self.broker):
            close = getattr(backend, "close", None)
            if close is not None:
                close()


__all__ = [
    "AT_MOST_ONCE",
    "BackendError",
    "BackendUnavailable",
    "InProcessBroker",
    "LocalObjectStore",
    "MemoryObjectStore",
    "MemoryTableStore",
    "MqttPublisher",
    "MqttSubscriber",
    "ObjectNotFound",
    "ObjectStore",
    "ObjectStoreRef",
    "PubSubMessage",
    "Services",
    "SqliteTableStore",
    "Subscription",
    "TableNotFound",
    "TableQuerySpec",
    "TableStore",
    "blob_download",
    "blob_upload",
    "publish",
    "table_query",
    "topic_matches",
    "with_retries",
]

"""Raw run telemetry, detached from the live engine so it can be saved and reloaded."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

from .engine import BUCKET_NS

FORMAT_VERSION = 1


@dataclass
class Telemetry:
    start_ns: int
    sources_stopped_ns: Optional[int]
    end_ns: Optional[int]
    bucket_ns: int
    # counts of source emissions / sink arrivals per bucket index (absolute clock)
    emit_buckets: dict[int, int]
    arrival_buckets: dict[int, int]
    latency_ids: list[int]
    latency_ingress: list[int]
    latency_arrival: list[int]
    latency_seen: int
    unmatched: int
    task_stats: dict[str, dict]
    queue_samples: list[tuple[int, dict]]
    resource_samples: list[dict] = field(default_factory=list)
    failures: dict[str, str] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @classmethod
    def from_handle(cls, handle) -> "Telemetry":
        emit: Counter = Counter()
        arrive: Counter = Counter()
        ids, ing, arr = [], [], []
        seen = unmatched = 0
        for desc in handle.dataflow.tasks:
            for inst in handle.instances[desc.name]:
                emit.update(inst.emit_buckets)
                rec = inst.recorder
                if rec is not None:
                    arrive.update(rec.buckets)
                    ids.extend(rec.msg_ids)
                    ing.extend(rec.ingress)
                    arr.extend(rec.arrival)
                    seen += rec.seen
                    unmatched += rec.unmatched
        from .config import dataflow_to_dict

        stats = {name: asdict(s) for name, s in handle.stats().items()}
        aux = sorted(name for name, insts in handle.instances.items() if insts and insts[0].auxiliary)
        return cls(
            start_ns=handle.start_ns,
            sources_stopped_ns=handle.sources_stopped_ns,
            end_ns=handle.end_ns,
            bucket_ns=BUCKET_NS,
            emit_buckets=dict(sorted(emit.items())),
            arrival_buckets=dict(sorted(arrive.items())),
            latency_ids=ids,
            latency_ingress=ing,
            latency_arrival=arr,
            latency_seen=seen,
            unmatched=unmatched,
            task_stats=stats,
            queue_samples=list(handle.queue_samples),
            failures=handle.failures,
            meta={"dataflow": dataflow_to_dict(handle.dataflow), "auxiliary_sources": aux, "seed": handle.seed,
                  "queue_capacity": handle.queue_capacity},
        )

    @property
    def total_emitted(self) -> int:
        return sum(self.emit_buckets.values())

    @property
    def total_arrived(self) -> int:
        return sum(self.arrival_buckets.values())

    def to_json(self) -> str:
        d = asdict(self)
        d["format_version"] = FORMAT_VERSION
        d["emit_buckets"] = [[k, v] for k, v in sorted(self.emit_buckets.items())]
        d["arrival_buckets"] = [[k, v] for k, v in sorted(self.arrival_buckets.items())]
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Telemetry":
        d = json.loads(text)
        version = d.pop("format_version", None)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported telemetry format version {version!r}")
        d["emit_buckets"] = {int(k): v for k, v in d["emit_buckets"]}
        d["arrival_buckets"] = {int(k): v for k, v in d["arrival_buckets"]}
        d["queue_samples"] = [(t, q) for t, q in d["queue_samples"]]
        return cls(**d)

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.to_json(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "Telemetry":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

"""CSV replay with constant, max-rate, or timestamp-scaled pacing."""

from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..runtime.model import Message
from .pacing import max_rate, pace
from .spec import Schema, StreamSourceSpec

log = logging.getLogger(__name__)

_CASTS = {"int": int, "float": float, "str": str}


@dataclass
class LoadedRows:
    """Rows parsed against a schema, ready for paced emission."""

    event_times: list[int]
    fields: list[dict]
    raw: list[str]
    malformed: int = 0
    clamped: int = 0

    def __len__(self) -> int:
        return len(self.event_times)


def _parse_row(row: list[str], schema: Schema) -> tuple[int, dict]:
    if len(row) != len(schema.attributes):
        raise ValueError(f"expected {len(schema.attributes)} columns, got {len(row)}")
    out = {}
    ts = 0
    for attr, text in zip(schema.attributes, row):
        if attr.type == "timestamp":
            v = schema.parse_timestamp(text)
            out[attr.name] = v
        else:
            v = _CASTS[attr.type](text)
            out[attr.name] = v
        if attr.name == schema.timestamp_column:
            ts = v if attr.type == "timestamp" else schema.parse_timestamp(text)
    return ts, out


def load_rows(
    path,
    schema: Schema,
    *,
    delimiter: str = ",",
    clamp_non_monotonic: bool = True,
) -> LoadedRows:
    """Read a headed CSV file. Malformed rows are counted and skipped.

    Timestamps that go backwards are clamped to the previous value (and
    counted) when ``clamp_non_monotonic`` is set.
    """
    event_times: list[int] = []
    fields: list[dict] = []
    raw: list[str] = []
    malformed = clamped = 0
    prev: Optional[int] = None
    with open(path, newline="", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\r\n")
        names = next(csv.reader([header], delimiter=delimiter))
        if names != schema.names:
            raise ValueError(f"{path}: header {names} does not match schema {schema.names}")
        for line in fh:
            line = line.rstrip("\r\n")
            if not line:
                continue
            try:
                row = next(csv.reader([line], delimiter=delimiter))
                ts, parsed = _parse_row(row, schema)
            except (ValueError, StopIteration, csv.Error):
                malformed += 1
                continue
            if prev is not None and ts < prev and clamp_non_monotonic:
                ts = prev
                clamped += 1
            prev = ts
            event_times.append(ts)
            fields.append(parsed)
            raw.append(line)
    if malformed:
        log.warning("%s: skipped %d malformed rows", path, malformed)
    return LoadedRows(event_times, fields, raw, malformed, clamped)


def schedule(rows: LoadedRows, spec: StreamSourceSpec) -> Optional[list[float]]:
    """Emission offsets in seconds, or None for max-rate replay."""
    mode = spec.rate_mode
    n = len(rows)
    if mode.kind == "max_rate":
        return None
    if mode.kind == "constant":
        return [i / mode.value for i in range(n)]
    if n == 0:
        return []
    t0 = rows.event_times[0]
    f = mode.value
    return [(t - t0) / 1000.0 / f for t in rows.event_times]


class ReplaySource:
    """Source task replaying a CSV file.

    Data-parallel instances split the file into contiguous row ranges; every
    instance paces against the shared run start so the global schedule is
    preserved.
    """

    def __init__(self, spec: StreamSourceSpec, rows: Optional[LoadedRows] = None) -> None:
        spec.check()
        self.spec = spec
        self.rows = rows if rows is not None else load_rows(spec.file, spec.schema, delimiter=spec.delimiter)
        self.emitted = 0

    def run(self, ctx) -> None:
        rows = self.rows
        ctx.counters["malformed_rows"] += rows.malformed
        ctx.counters["clamped_timestamps"] += rows.clamped
        n = len(rows)
        lo = n * ctx.index // ctx.parallelism
        hi = n * (ctx.index + 1) // ctx.parallelism
        offsets = schedule(rows, self.spec)
        ets = rows.event_times
        if self.spec.emit_raw:
            payloads = rows.raw

            def make(i, j):
                return [Message(None, ets[k], None, {"payload": payloads[k]}) for k in range(lo + i, lo + j)]

        else:
            flds = rows.fields

            def make(i, j):
                return [Message(None, ets[k], None, dict(flds[k])) for k in range(lo + i, lo + j)]

        if offsets is None:
            self.emitted = max_rate(ctx, make, total=hi - lo)
        else:
            self.emitted = pace(ctx, offsets[lo:hi], make)


def replay(spec: StreamSourceSpec) -> ReplaySource:
    """Build a replay source task for ``spec``."""
    return ReplaySource(spec)


def expected_runtime_s(rows: LoadedRows, factor: float) -> float:
    """Wall-clock span of a scaled replay (first to last emission)."""
    if len(rows) < 2:
        return 0.0
    return (rows.event_times[-1] - rows.event_times[0]) / 1000.0 / factor

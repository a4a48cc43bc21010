"""Parse tasks: XML documents (micro-benchmark) and CSV rows (applications)."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Optional, Sequence

from ..streamgen.spec import Schema


def xml_leaves(document: str) -> dict[str, str]:
    """Leaf element tag -> text. Raises ET.ParseError on malformed input."""
    root = ET.fromstring(document)
    out = {}
    for el in root.iter():
        if len(el) == 0:
            out[el.tag] = (el.text or "").strip()
    return out


class XmlParseTask:
    """Transform 1:1. Reads ``field``; without it, parses the configured document."""

    def __init__(self, field: str = "xml", document: Optional[str] = None, counters=None) -> None:
        self.field = field
        self.document = document
        self.counters = counters if counters is not None else {}

    def process(self, msg, emit) -> None:
        doc = msg.fields.get(self.field, self.document)
        try:
            leaves = xml_leaves(doc)
        except (ET.ParseError, TypeError):
            self.counters["parse_error"] = self.counters.get("parse_error", 0) + 1
            return
        emit(msg.derive(leaves))


def xml_parse(message, field: str = "xml") -> dict[str, str]:
    return xml_leaves(message.fields[field])


def city_observation_xml(fields: dict) -> str:
    """Serialize one CITY row as an XML observation document."""
    inner = "".join(f"<{k}>{v}</{k}>" for k, v in fields.items())
    return f"<observation>{inner}</observation>"


class ObservationParseTask:
    """Flat map 1:N: split a raw CSV row into one message per observation type.

    Output key is ``"<observation>|<entity id>"`` so downstream hash routing
    groups by observation type and sensor/taxi id.
    """

    def __init__(self, schema: Schema, id_field: str, observations: Sequence[str],
                 delimiter: str = ",", counters=None) -> None:
        self.schema = schema
        self.delimiter = delimiter
        self.counters = counters if counters is not None else {}
        names = schema.names
        self.width = len(names)
        self.id_idx = names.index(id_field)
        self.obs = [(o, names.index(o)) for o in observations]

    def process(self, msg, emit) -> None:
        cols = msg.fields["payload"].split(self.delimiter)
        if len(cols) != self.width:
            self.counters["parse_error"] = self.counters.get("parse_error", 0) + 1
            return
        ident = cols[self.id_idx]
        for name, idx in self.obs:
            try:
                v = float(cols[idx])
            except ValueError:
                self.counters["parse_error"] = self.counters.get("parse_error", 0) + 1
                continue
            emit(msg.derive({"id": ident, "obs": name, "value": v}, key=f"{name}|{ident}"))


class RowParseTask:
    """Transform 1:1: raw CSV row to typed fields."""

    _CASTS = {"int": int, "float": float}

    def __init__(self, schema: Schema, id_field: Optional[str] = None, delimiter: str = ",", counters=None) -> None:
        self.schema = schema
        self.delimiter = delimiter
        self.counters = counters if counters is not None else {}
        self.names = schema.names
        self.casts = [self._CASTS.get(a.type) for a in schema.attributes]
        self.id_field = id_field

    def process(self, msg, emit) -> None:
        cols = msg.fields["payload"].split(self.delimiter)
        if len(cols) != len(self.names):
            self.counters["parse_error"] = self.counters.get("parse_error", 0) + 1
            return
        out = {}
        try:
            for name, cast, text in zip(self.names, self.casts, cols):
                out[name] = cast(text) if cast is not None else text
        except ValueError:
            self.counters["parse_error"] = self.counters.get("parse_error", 0) + 1
            return
        emit(msg.derive(out, key=out.get(self.id_field) if self.id_field else None))

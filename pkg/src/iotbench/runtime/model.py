"""Core dataflow types: messages, task descriptors, windows, edges."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Optional

SOURCE = "source"
SINK = "sink"
TRANSFORM = "transform"
FILTER = "filter"
FLATMAP = "flatmap"
AGGREGATE = "aggregate"
TASK_KINDS = (SOURCE, SINK, TRANSFORM, FILTER, FLATMAP, AGGREGATE)

DUPLICATE = "duplicate"
ROUND_ROBIN = "round_robin"
HASH = "hash"


class Message:
    """A tuple flowing through a dataflow.

    Messages are treated as immutable once emitted; tasks build new ones with
    :meth:`derive`, which carries the causal ``ingress_time`` forward.
    """

    __slots__ = ("msg_id", "event_time", "ingress_time", "fields", "key", "control")

    def __init__(
        self,
        msg_id: Optional[int],
        event_time: int,
        ingress_time: Optional[int],
        fields: dict,
        key: Optional[str] = None,
        control: Any = None,
    ) -> None:
        self.msg_id = msg_id
        self.event_time = event_time
        self.ingress_time = ingress_time
        self.fields = fields
        self.key = key
        self.control = control

    def derive(self, fields: dict, key: Optional[str] = None) -> "Message":
        return Message(
            None,
            self.event_time,
            self.ingress_time,
            fields,
            self.key if key is None else key,
        )

    def size_bytes(self) -> int:
        return len(",".join(str(v) for v in self.fields.values()).encode("utf-8"))

    def __repr__(self) -> str:
        return (
            f"Message(id={self.msg_id}, event_time={self.event_time}, "
            f"key={self.key!r}, fields={self.fields!r})"
        )


_SIDE = re.compile(r"^\s*(\d+|[A-Za-z])(?:\s*/\s*(\d+))?\s*$")


@dataclass(frozen=True)
class Selectivity:
    """Declared in:out ratio such as ``1:1``, ``N:1`` or ``1:0/1``.

    Each side is an integer, a symbol (``N``, ``M``) or an ``a/b`` pair of
    alternatives. ``gain`` is the expected steady-state number of outputs per
    input, when it is known up front; filters leave it unset because their
    pass ratio is data dependent.
    """

    inp: str
    out: str
    gain: Optional[float] = None

    @classmethod
    def parse(cls, text: str, gain: Optional[float] = None) -> "Selectivity":
        try:
            inp, out = text.split(":")
        except ValueError:
            raise ValueError(f"selectivity must look like 'in:out', got {text!r}") from None
        for side in (inp, out):
            if not _SIDE.match(side):
                raise ValueError(f"bad selectivity side {side!r} in {text!r}")
        return cls(inp.strip(), out.strip(), gain)

    def __str__(self) -> str:
        return f"{self.inp}:{self.out}"

    @staticmethod
    def _bounds(side: str) -> Optional[tuple[int, int]]:
        m = _SIDE.match(side)
        if m is None or not m.group(1).isdigit():
            return None
        a = int(m.group(1))
        b = int(m.group(2)) if m.group(2) is not None else a
        return min(a, b), max(a, b)

    def max_ratio(self) -> Optional[Fraction]:
        """Largest out/in ratio, or None when a side is symbolic."""
        i, o = self._bounds(self.inp), self._bounds(self.out)
        if i is None or o is None or i[0] == 0:
            return None
        return Fraction(o[1], i[0])

    @property
    def is_one_to_one(self) -> bool:
        return self.inp == "1" and self.out == "1"


ONE_TO_ONE = Selectivity("1", "1", 1.0)


@dataclass(frozen=True)
class WindowSpec:
    mode: str  # "count" or "time"
    width: int  # messages, or milliseconds for time windows
    slide: int

    def violations(self) -> list[str]:
        out = []
        if self.mode not in ("count", "time"):
            out.append(f"window mode must be count or time, got {self.mode!r}")
        if self.width <= 0:
            out.append("window width must be positive")
        if self.slide <= 0:
            out.append("window slide must be positive")
        elif self.slide > self.width:
            out.append("window slide must not exceed width")
        return out


@dataclass
class TaskDescriptor:
    name: str
    kind: str
    selectivity: Selectivity = ONE_TO_ONE
    parallelism: int = 1
    stateful: bool = False
    window: Optional[WindowSpec] = None
    impl: Optional[str] = None
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    routing: str = ROUND_ROBIN
    hash_field: Optional[str] = None

    @classmethod
    def hashed(cls, src: str, dst: str, field_name: str = "key") -> "Edge":
        return cls(src, dst, HASH, field_name)

    def describe(self) -> str:
        r = f"hash({self.hash_field})" if self.routing == HASH else self.routing
        return f"{self.src}->{self.dst} [{r}]"


@dataclass
class Dataflow:
    tasks: list[TaskDescriptor]
    edges: list[Edge]
    name: str = "dataflow"

    def task(self, name: str) -> TaskDescriptor:
        for t in self.tasks:
            if t.name == name:
                return t
        raise KeyError(name)

    def inbound(self, name: str) -> list[Edge]:
        return [e for e in self.edges if e.dst == name]

    def outbound(self, name: str) -> list[Edge]:
        return [e for e in self.edges if e.src == name]

    def sources(self) -> list[TaskDescriptor]:
        return [t for t in self.tasks if t.kind == SOURCE]

    def sinks(self) -> list[TaskDescriptor]:
        return [t for t in self.tasks if t.kind == SINK]

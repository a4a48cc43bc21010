"""Stream source configuration types."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional, Union

ATTR_TYPES = ("int", "float", "str", "timestamp")


@dataclass(frozen=True)
class Attribute:
    name: str
    type: str = "str"


@dataclass(frozen=True)
class Schema:
    attributes: tuple[Attribute, ...]
    timestamp_column: Optional[str] = None
    # "epoch_ms", "epoch_s", or a strptime pattern (interpreted as UTC)
    timestamp_format: str = "epoch_ms"

    @classmethod
    def of(cls, *names_types, timestamp_column=None, timestamp_format="epoch_ms") -> "Schema":
        attrs = tuple(Attribute(n, t) for n, t in names_types)
        return cls(attrs, timestamp_column, timestamp_format)

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    def index(self, name: str) -> int:
        return self.names.index(name)

    def parse_timestamp(self, text: str) -> int:
        """Milliseconds since epoch."""
        fmt = self.timestamp_format
        if fmt == "epoch_ms":
            return int(text)
        if fmt == "epoch_s":
            return int(round(float(text) * 1000))
        dt = datetime.strptime(text, fmt).replace(tzinfo=timezone.utc)
        return int(dt.timestamp() * 1000)

    def format_timestamp(self, ms: int) -> str:
        fmt = self.timestamp_format
        if fmt == "epoch_ms":
            return str(ms)
        if fmt == "epoch_s":
            return f"{ms / 1000:.3f}"
        return datetime.fromtimestamp(ms / 1000, tz=timezone.utc).strftime(fmt)

    def violations(self) -> list[str]:
        out = []
        for a in self.attributes:
            if a.type not in ATTR_TYPES:
                out.append(f"attribute {a.name}: unknown type {a.type!r}")
        if self.timestamp_column is not None and self.timestamp_column not in self.names:
            out.append(f"timestamp column {self.timestamp_column!r} not in schema")
        return out


@dataclass(frozen=True)
class RateMode:
    kind: str  # constant | max_rate | scaled_timestamps
    value: Optional[float] = None

    @classmethod
    def constant(cls, rate: float) -> "RateMode":
        return cls("constant", float(rate))

    @classmethod
    def max_rate(cls) -> "RateMode":
        return cls("max_rate")

    @classmethod
    def scaled(cls, factor: float) -> "RateMode":
        return cls("scaled_timestamps", float(factor))

    def violations(self) -> list[str]:
        if self.kind == "max_rate":
            return []
        if self.kind not in ("constant", "scaled_timestamps"):
            return [f"unknown rate mode {self.kind!r}"]
        if self.value is None or self.value <= 0:
            return [f"{self.kind} needs a positive value"]
        return []


# rate distributions for synthetic streams -----------------------------------


@dataclass(frozen=True)
class Uniform:
    """Constant target rate; taken from the stream's constant rate when unset."""

    rate: Optional[float] = None

    def violations(self):
        return [] if self.rate is None or self.rate > 0 else ["uniform rate must be positive"]


@dataclass(frozen=True)
class Normal:
    mean: float
    std: float

    def violations(self):
        out = []
        if self.std <= 0:
            out.append("normal: std must be > 0")
        if self.mean <= 0:
            out.append("normal: mean must be > 0")
        return out


@dataclass(frozen=True)
class Bimodal:
    mean1: float
    std1: float
    mean2: float
    std2: float
    mix: float = 0.5  # probability of the first mode

    def violations(self):
        out = []
        if self.std1 <= 0 or self.std2 <= 0:
            out.append("bimodal: std must be > 0")
        if not 0.0 <= self.mix <= 1.0:
            out.append("bimodal: mix must be in [0, 1]")
        if self.mean1 <= 0 or self.mean2 <= 0:
            out.append("bimodal: means must be > 0")
        return out


@dataclass(frozen=True)
class Sawtooth:
    period: float  # seconds
    low: float
    high: float

    def violations(self):
        out = []
        if self.period <= 0:
            out.append("sawtooth: period must be > 0")
        if self.low < 0 or self.high < self.low:
            out.append("sawtooth: need 0 <= low <= high")
        return out


@dataclass(frozen=True)
class Burst:
    base: float
    peak: float
    burst_len: float  # seconds
    gap: float  # seconds of base rate between bursts

    def violations(self):
        out = []
        if self.base < 0 or self.peak < self.base:
            out.append("burst: need 0 <= base <= peak")
        if self.burst_len <= 0 or self.gap < 0:
            out.append("burst: burst_len must be > 0 and gap >= 0")
        return out


Distribution = Union[Uniform, Normal, Bimodal, Sawtooth, Burst]


@dataclass(frozen=True)
class StreamSourceSpec:
    mode: str  # replay | synthetic
    rate_mode: RateMode
    schema: Schema
    file: Optional[str] = None
    distribution: Optional[Distribution] = None
    payload_bytes: Optional[int] = None
    delimiter: str = ","
    emit_raw: bool = False
    segment_s: float = 1.0  # synthetic: rate is piecewise constant over segments

    def violations(self) -> list[str]:
        out = list(self.rate_mode.violations()) + self.schema.violations()
        if self.mode not in ("replay", "synthetic"):
            out.append(f"unknown source mode {self.mode!r}")
        if self.mode == "replay" and not self.file:
            out.append("replay needs a file")
        if self.rate_mode.kind == "scaled_timestamps" and self.schema.timestamp_column is None:
            out.append("scaled_timestamps requires a timestamp column in the schema")
        if self.mode == "synthetic":
            dist = self.distribution or Uniform()
            out.extend(dist.violations())
            if isinstance(dist, Uniform) and dist.rate is None and self.rate_mode.kind != "constant":
                out.append("uniform distribution needs a rate (or a constant rate mode)")
            if self.segment_s <= 0:
                out.append("segment_s must be > 0")
        if self.payload_bytes is not None and self.payload_bytes <= 0:
            out.append("payload_bytes must be positive")
        return out

    def check(self) -> None:
        problems = self.violations()
        if problems:
            raise ValueError("invalid stream spec: " + "; ".join(problems))

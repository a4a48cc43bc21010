"""Dataset descriptors for CITY and TAXI and an offline fixture synthesizer.

The real datasets are large downloads that may disappear, so the benchmark
can run from generated fixtures that share their schema, mean row size and
rate-distribution shape. Real files load through the same schema when their
header matches the descriptor.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .spec import Attribute, Schema

NATIVE_SEGMENT_S = 60  # fixture rates are drawn per native minute


@dataclass(frozen=True)
class DatasetProfile:
    name: str
    attribute_count: int
    format: str
    mean_size_bytes: int
    peak_rate_at_1000x: int
    distribution_label: str


@dataclass(frozen=True)
class DatasetDescriptor:
    profile: DatasetProfile
    schema: Schema
    id_field: str
    observations: tuple[str, ...]
    valid_ranges: dict
    stats_window: int
    rate_model: dict
    fixture: dict
    predictive: dict


@lru_cache(maxsize=None)
def descriptor(name: str) -> DatasetDescriptor:
    key = name.lower()
    try:
        text = resources.files("iotbench.data").joinpath(f"{key}.json").read_text(encoding="utf-8")
    except FileNotFoundError:
        raise KeyError(f"unknown dataset {name!r} (known: CITY, TAXI)") from None
    d = json.loads(text)
    profile = DatasetProfile(
        name=d["name"],
        attribute_count=d["attribute_count"],
        format=d["format"],
        mean_size_bytes=d["mean_size_bytes"],
        peak_rate_at_1000x=d["peak_rate_at_1000x"],
        distribution_label=d["distribution_label"],
    )
    schema = Schema(
        tuple(Attribute(a["name"], a["type"]) for a in d["attributes"]),
        d["timestamp"]["column"],
        d["timestamp"]["format"],
    )
    return DatasetDescriptor(
        profile=profile,
        schema=schema,
        id_field=d["id_field"],
        observations=tuple(d["observations"]),
        valid_ranges={k: tuple(v) for k, v in d["valid_ranges"].items()},
        stats_window=d["stats_window"],
        rate_model=d["rate_model"],
        fixture=d["fixture"],
        predictive=d["predictive"],
    )


def profile(name: str) -> DatasetProfile:
    return descriptor(name).profile


def bloom_key(observation: str, value: float) -> str:
    """Discretized membership key used by the outlier filter."""
    return f"{observation}:{math.floor(value)}"


def reference_set(name: str) -> list[str]:
    """All in-range discretized observation values for a dataset."""
    desc = descriptor(name)
    out = []
    for obs in desc.observations:
        lo, hi = desc.valid_ranges[obs]
        out.extend(f"{obs}:{v}" for v in range(int(lo), int(hi) + 1))
    return out


def write_reference_set(name: str, path) -> Path:
    path = Path(path)
    path.write_text("\n".join(reference_set(name)) + "\n", encoding="utf-8")
    return path


def load_reference_set(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh if line.strip()]


# ---------------------------------------------------------------------------
# fixture synthesis


@dataclass
class FixtureInfo:
    dataset: str
    csv_path: str
    profile_path: str
    rows: int
    span_s: float
    mean_size_bytes: float
    seed: int


def _native_rates(desc: DatasetDescriptor, starts_ms: np.ndarray, rng) -> np.ndarray:
    """Rate at 1000x scaling for each native-minute segment."""
    m = desc.rate_model
    n = len(starts_ms)
    if m["kind"] == "normal":
        rates = rng.normal(m["mean"], m["std"], n)
    elif m["kind"] == "diurnal_bimodal":
        hours = (starts_ms // 3_600_000) % 24
        lo_h, hi_h = m["low_hours"]
        low = (hours >= lo_h) & (hours < hi_h)
        rates = np.where(
            low,
            rng.normal(m["low"], m["low_std"], n),
            rng.normal(m["high"], m["high_std"], n),
        )
    else:
        raise ValueError(f"unknown rate model {m['kind']!r}")
    return np.clip(rates, 1.0, None)


def _hex_ids(rng, n: int, length: int) -> list[str]:
    out = []
    for i in range(n):
        h = hashlib.sha256(f"{rng.integers(1 << 62)}:{i}".encode()).hexdigest()
        out.append(h[:length].upper() if length >= 32 else h[:length])
    return out


def _city_rows(desc, rng, ts_ms: np.ndarray, outlier_rate: float) -> list[list[str]]:
    n_sensors = desc.fixture["entities"]
    ids = ["ci" + s for s in _hex_ids(rng, n_sensors, 23)]
    lon = rng.uniform(-122.5, 77.6, n_sensors)
    lat = rng.uniform(-33.9, 52.5, n_sensors)
    base_t = rng.normal(14, 7, n_sensors)
    base_h = rng.uniform(30, 70, n_sensors)
    base_d = rng.uniform(80, 600, n_sensors)
    base_a = rng.uniform(10, 80, n_sensors)
    n = len(ts_ms)
    who = rng.integers(0, n_sensors, n)
    hour = (ts_ms / 3_600_000.0) % 24
    day = np.sin((hour - 8) / 24 * 2 * np.pi)
    temp = base_t[who] + 5 * day + rng.normal(0, 0.6, n)
    hum = np.clip(base_h[who] - 8 * day + rng.normal(0, 2, n), 0, 100)
    light = np.clip(900 * np.clip(day + 0.2, 0, None) + rng.normal(0, 25, n), 0, 2000)
    dust = np.clip(base_d[who] + rng.normal(0, 30, n), 0, 1000)
    aq = np.clip(base_a[who] + 0.05 * dust + rng.normal(0, 3, n), 0, 500)
    cols = {"temperature": temp, "humidity": hum, "light": light, "dust": dust, "airquality_raw": aq}
    bad = {"temperature": 180.0, "humidity": -40.0, "light": 9000.0, "dust": 4000.0, "airquality_raw": 2000.0}
    for obs, arr in cols.items():
        mask = rng.random(n) < outlier_rate
        arr[mask] = bad[obs] + rng.uniform(0, 50, int(mask.sum()))
    schema = desc.schema
    rows = []
    for k in range(n):
        s = int(who[k])
        rows.append(
            [
                schema.format_timestamp(int(ts_ms[k])),
                ids[s],
                f"{lon[s]:.6f}",
                f"{lat[s]:.6f}",
                f"{temp[k]:.1f}",
                f"{hum[k]:.1f}",
                f"{light[k]:.1f}",
                f"{dust[k]:.2f}",
                f"{aq[k]:.2f}",
            ]
        )
    return rows


def _taxi_rows(desc, rng, ts_ms: np.ndarray, outlier_rate: float) -> list[list[str]]:
    n_taxis = desc.fixture["entities"]
    medallions = _hex_ids(rng, n_taxis, 32)
    licenses = _hex_ids(rng, n_taxis, 32)
    n = len(ts_ms)
    who = rng.integers(0, n_taxis, n)
    trip = np.clip(rng.lognormal(np.log(600), 0.6, n), 60, 7000)
    speed_mph = np.clip(rng.normal(12, 3, n), 3, 40)
    dist = np.clip(trip / 3600 * speed_mph, 0.1, 99)
    fare = np.clip(2.5 + 2.5 * dist + 0.4 * trip / 60 * 0.5 + rng.normal(0, 0.8, n), 2.5, 480)
    total = np.clip(fare * rng.uniform(1.0, 1.25, n) + rng.choice([0, 0, 0, 5.33], n), 2.5, 590)
    cols = {"trip_time_in_secs": trip, "trip_distance": dist, "fare_amount": fare, "total_amount": total}
    bad = {"trip_time_in_secs": 90000.0, "trip_distance": 900.0, "fare_amount": -80.0, "total_amount": 5000.0}
    for obs, arr in cols.items():
        mask = rng.random(n) < outlier_rate
        arr[mask] = bad[obs] + rng.uniform(0, 50, int(mask.sum()))
    plon = rng.uniform(-74.02, -73.93, n)
    plat = rng.uniform(40.70, 40.80, n)
    dlon = plon + rng.normal(0, 0.02, n)
    dlat = plat + rng.normal(0, 0.02, n)
    schema = desc.schema
    rows = []
    for k in range(n):
        t = int(ts_ms[k])
        pickup = t - int(max(0.0, min(trip[k], 86_000)) * 1000)
        rows.append(
            [
                medallions[who[k]],
                licenses[who[k]],
                schema.format_timestamp(pickup),
                schema.format_timestamp(t),
                f"{trip[k]:.0f}",
                f"{dist[k]:.2f}",
                f"{plon[k]:.8f} {plat[k]:.8f}",
                f"{dlon[k]:.8f} {dlat[k]:.8f}",
                f"{fare[k]:.2f}",
                f"{total[k]:.2f}",
            ]
        )
    return rows


def synthesize_fixture(
    name: str,
    out_dir,
    *,
    hours: float = 1.0,
    seed: int = 7,
    start: Optional[str] = None,
    entities: Optional[int] = None,
) -> FixtureInfo:
    """Write ``<out_dir>/<name>_<hours>h_s<seed>.csv`` plus a profile document.

    Deterministic in (name, hours, seed, start, entities).
    """
    desc = descriptor(name)
    if entities is not None:
        desc = DatasetDescriptor(**{**desc.__dict__, "fixture": {**desc.fixture, "entities": entities}})
    rng = np.random.default_rng(seed)
    start_str = start or desc.fixture["start"]
    t0 = int(datetime.strptime(start_str, "%Y-%m-%d %H:%M:%S").replace(tzinfo=timezone.utc).timestamp() * 1000)
    span_ms = int(round(hours * 3_600_000))
    seg_ms = NATIVE_SEGMENT_S * 1000
    starts = np.arange(t0, t0 + span_ms, seg_ms, dtype=np.int64)
    rates = _native_rates(desc, starts, rng)
    ts: list[np.ndarray] = []
    carry = 0.0
    for s, r in zip(starts, rates):
        length = min(seg_ms, t0 + span_ms - s)
        exact = r / 1000.0 * (length / 1000.0) + carry
        cnt = int(exact)
        carry = exact - cnt
        if cnt:
            ts.append(s + (np.arange(cnt) * length) // cnt)
    ts_ms = np.concatenate(ts) if ts else np.zeros(0, dtype=np.int64)
    # a final row pins the end of the span so scaled replay lasts exactly span/scale
    ts_ms = np.append(ts_ms, t0 + span_ms)
    outlier_rate = desc.fixture["outlier_rate"]
    rows = (_city_rows if desc.profile.name == "CITY" else _taxi_rows)(desc, rng, ts_ms, outlier_rate)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tag = f"{desc.profile.name.lower()}_{hours:g}h_s{seed}"
    if entities is not None:
        tag += f"_e{entities}"
    csv_path = out_dir / f"{tag}.csv"
    lines = [",".join(desc.schema.names)] + [",".join(r) for r in rows]
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    sizes = [len(",".join(r).encode("utf-8")) for r in rows]
    mean_size = float(np.mean(sizes)) if sizes else 0.0
    info = FixtureInfo(
        dataset=desc.profile.name,
        csv_path=str(csv_path),
        profile_path=str(out_dir / f"{tag}.profile.json"),
        rows=len(rows),
        span_s=span_ms / 1000.0,
        mean_size_bytes=round(mean_size, 2),
        seed=seed,
    )
    meta = {"profile": asdict(desc.profile), "fixture": asdict(info), "start": start_str, "hours": hours}
    Path(info.profile_path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return info


def ensure_fixture(name: str, cache_dir, **kwargs) -> FixtureInfo:
    """Synthesize a fixture once and reuse it from ``cache_dir`` afterwards."""
    cache_dir = Path(cache_dir)
    hours = kwargs.get("hours", 1.0)
    seed = kwargs.get("seed", 7)
    tag = f"{name.lower()}_{hours:g}h_s{seed}"
    if kwargs.get("entities") is not None:
        tag += f"_e{kwargs['entities']}"
    meta = cache_dir / f"{tag}.profile.json"
    if meta.exists() and (cache_dir / f"{tag}.csv").exists():
        d = json.loads(meta.read_text(encoding="utf-8"))["fixture"]
        return FixtureInfo(**d)
    return synthesize_fixture(name, cache_dir, **kwargs)

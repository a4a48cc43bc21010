"""Command-line entry point.

Subcommands: ``micro``, ``app``, ``search-peak``, ``plan``, ``report``.
Every option can also come from the environment as
``IOTBENCH_<SUBCOMMAND>_<OPTION>`` (e.g. ``IOTBENCH_MICRO_RATE=500``) or from
a YAML/JSON run document passed with ``--config``; explicit flags win over
the document.

Exit codes: 0 success, 1 configuration error, 2 run failure,
3 the run produced no data.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import click
import yaml

from .iobackends import Services
from .metrics import (
    JITTER_THRESHOLD,
    MetricsReport,
    ResourceSampler,
    emit_report,
    make_probe,
    peak_rate_search,
    task_input_rates,
    with_rate,
)
from .runtime import DEFAULT_QUEUE_CAPACITY, Dataflow, StartupError, Telemetry, run
from .runtime.config import ConfigError, load_dataflow
from .streamgen import datasets
from .tasks import registry_for
from .tasks.models import ModelError
from .topologies import CATALOG, PROXY_CODES, build_app, build_micro, checked, prepare_pred

log = logging.getLogger("iotbench")

EXIT_OK, EXIT_CONFIG, EXIT_RUN, EXIT_EMPTY = 0, 1, 2, 3
DEFAULT_MICRO_DURATION_S = 60.0
DRAIN_GRACE_S = 120.0

_DURATION = re.compile(r"^\s*([0-9]*\.?[0-9]+)\s*(ms|s|m|min|h)?\s*$")
_UNIT_S = {None: 1.0, "s": 1.0, "ms": 1e-3, "m": 60.0, "min": 60.0, "h": 3600.0}


def parse_duration(text) -> float:
    """``"60s"``, ``"2m"``, ``"500ms"``, ``"1h"`` or a bare number of seconds."""
    if isinstance(text, (int, float)):
        return float(text)
    m = _DURATION.match(str(text))
    if not m:
        raise ValueError(f"bad duration {text!r} (use e.g. 60s, 2m, 500ms)")
    return float(m.group(1)) * _UNIT_S[m.group(2)]


class DurationType(click.ParamType):
    name = "duration"

    def convert(self, value, param, ctx):
        try:
            return parse_duration(value)
        except ValueError as exc:
            self.fail(str(exc), param, ctx)


@dataclass
class RunConfig:
    """Everything a run depends on; written next to every report."""

    topology: Optional[str] = None
    dataset: Optional[str] = None
    fixture: Optional[str] = None
    fixture_hours: float = 1.0
    fixture_cache: Optional[str] = None
    rate: Optional[float] = None
    scale: float = 1000.0
    duration: Optional[float] = None
    seed: int = 0
    out: str = "iotbench-out"
    parallelism: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    queue_capacity: int = DEFAULT_QUEUE_CAPACITY
    jitter_threshold: float = JITTER_THRESHOLD
    resource_period_s: float = 5.0
    backend: str = "memory"
    backend_root: Optional[str] = None
    refresh_s: Optional[float] = None
    probe_s: float = 4.0
    start_rate: float = 500.0
    tolerance: float = 0.05

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: expected a mapping at top level")
        return cls().merge(doc)

    def merge(self, values: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(self)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        updates = {k: v for k, v in values.items() if v is not None}
        if "duration" in updates:
            updates["duration"] = parse_duration(updates["duration"])
        return dataclasses.replace(self, **updates)

    def check(self) -> "RunConfig":
        if self.duration is not None and self.duration <= 0:
            raise ConfigError("duration must be > 0")
        if self.rate is not None and self.rate <= 0:
            raise ConfigError("rate must be > 0")
        if self.scale <= 0:
            raise ConfigError("scale must be > 0")
        if self.fixture is not None and not Path(self.fixture).is_file():
            raise ConfigError(f"fixture file not found: {self.fixture}")
        if self.backend not in ("memory", "local"):
            raise ConfigError(f"backend must be memory or local, got {self.backend!r}")
        if self.backend == "local" and not self.backend_root:
            raise ConfigError("the local backend needs backend_root")
        return self

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


# running ---------------------------------------------------------------------


def _services(cfg: RunConfig) -> Services:
    if cfg.backend == "local":
        return Services.local(cfg.backend_root)
    return Services.memory()


def _micro_dataflow(cfg: RunConfig) -> Dataflow:
    topo = cfg.topology
    if topo is None:
        raise ConfigError("no topology given")
    if Path(topo).is_file():
        df = load_dataflow(topo)
        for name, p in cfg.parallelism.items():
            df.task(name).parallelism = int(p)
        for name, extra in cfg.params.items():
            df.task(name).params = {**df.task(name).params, **extra}
        return checked(df)
    if topo.upper() not in CATALOG:
        raise ConfigError(f"unknown topology {topo!r} (known: {', '.join(CATALOG)})")
    code = topo.upper()
    df = build_micro(code, rate=cfg.rate, parallelism=int(cfg.parallelism.get(code.lower(), 1)),
                     params=cfg.params.get(code.lower()))
    return df


def execute(df: Dataflow, cfg: RunConfig, services: Services, duration: Optional[float], outdir: Path,
            peak_rate: Optional[float] = None) -> tuple[MetricsReport, dict]:
    """Run ``df`` with resource sampling, then write telemetry and the report under ``outdir``."""
    sampler = ResourceSampler(cfg.resource_period_s)
    timeout = None if duration is None else duration + DRAIN_GRACE_S
    sampler.start()
    sampler.sample()
    try:
        handle = run(df, duration, registry_for(df), timeout=timeout, seed=cfg.seed, services=services,
                     queue_capacity=cfg.queue_capacity)
    finally:
        sampler.sample()
        sampler.stop()
    tel = handle.telemetry()
    tel.resource_samples = [s.as_dict() for s in sampler.samples]
    tel.meta["config"] = cfg.as_dict()
    # labels live in the telemetry so `report` regenerates an identical summary
    tel.meta.update({"topology": cfg.topology, "dataset": cfg.dataset, "peak_rate": peak_rate})
    outdir.mkdir(parents=True, exist_ok=True)
    tel.save(outdir / "telemetry.json")
    (outdir / "config.json").write_text(json.dumps(cfg.as_dict(), indent=2, sort_keys=True) + "\n",
                                        encoding="utf-8")
    report, _ = emit_report(tel, outdir)
    return report, handle.failures


def _finish(report: MetricsReport, failures: dict, outdir: Path) -> int:
    s = report.summary()
    click.echo(f"report: {outdir}")
    med = s["latency_ms"].get("median")
    click.echo(f"  latency median: {med if med is None else f'{med:.3f} ms'}")
    j = report.median_abs_jitter
    click.echo(f"  median |jitter|: {'n/a' if j is None else f'{j:.4f}'}  stable: {report.stable}")
    if report.peak_rate is not None:
        click.echo(f"  peak rate: {report.peak_rate:.1f} msg/s")
    for w in report.warnings:
        click.echo(f"  warning: {w}", err=True)
    if failures:
        for label, err in sorted(failures.items()):
            click.echo(f"  failed: {label}: {err}", err=True)
        return EXIT_RUN
    if not report.has_data:
        return EXIT_EMPTY
    return EXIT_OK


def run_micro(cfg: RunConfig, search_peak: bool = False) -> int:
    df = _micro_dataflow(cfg)
    services = _services(cfg)
    out = Path(cfg.out)
    try:
        peak = None
        if search_peak:
            probe = make_probe(df, registry_for, cfg.probe_s, cfg.jitter_threshold, seed=cfg.seed,
                               services=services, queue_capacity=cfg.queue_capacity)
            result = peak_rate_search(probe, start_rate=cfg.rate or cfg.start_rate, tolerance=cfg.tolerance)
            for line in result.diagnostics():
                click.echo(f"  probe {line}")
            if result.peak_rate is None:
                click.echo("no sustainable rate found", err=True)
                return EXIT_RUN
            peak = result.peak_rate
            duration = cfg.duration or max(cfg.probe_s, 10.0)
            df = with_rate(df, peak, int(peak * duration))
        else:
            duration = cfg.duration or DEFAULT_MICRO_DURATION_S
        report, failures = execute(df, cfg, services, duration, out, peak_rate=peak)
    finally:
        services.close()
    return _finish(report, failures, out)


def run_app(cfg: RunConfig) -> int:
    app = (cfg.topology or "").upper()
    if app not in ("STATS", "PRED"):
        raise ConfigError(f"unknown application {cfg.topology!r} (known: STATS, PRED)")
    if not cfg.dataset:
        raise ConfigError("an application run needs --dataset")
    datasets.descriptor(cfg.dataset)
    out = Path(cfg.out)
    fixture = cfg.fixture
    if fixture is None:
        cache = Path(cfg.fixture_cache) if cfg.fixture_cache else out / "fixtures"
        info = datasets.ensure_fixture(cfg.dataset, cache, hours=cfg.fixture_hours, seed=7)
        fixture = info.csv_path
        click.echo(f"fixture: {fixture} ({info.rows} rows, {info.span_s:.0f} s native)")
    kwargs: dict[str, Any] = {"scale": cfg.scale, "parallelism": cfg.parallelism, "params": cfg.params}
    if app == "PRED" and cfg.refresh_s is not None:
        kwargs["refresh_s"] = cfg.refresh_s
    df = build_app(app, cfg.dataset, fixture, **kwargs)
    services = _services(cfg)
    try:
        if app == "PRED":
            prepare_pred(services, cfg.dataset, fixture)
        report, failures = execute(df, cfg, services, cfg.duration, out)
    finally:
        services.close()
    return _finish(report, failures, out)


def plan(reports: list[str], cfg: RunConfig) -> list[dict]:
    """Suggested parallelism per application task from measured micro-benchmark peaks.

    Each task's input rate is the application input rate times the
    selectivity along the path to it; its parallelism is that rate over the
    peak of the catalog task standing in for it. Filters without a measured
    pass ratio are assumed to pass everything.
    """
    peaks: dict[str, float] = {}
    for r in reports:
        p = Path(r)
        if p.is_dir():
            p = p / "summary.json"
        doc = json.loads(p.read_text(encoding="utf-8"))
        code = str((doc.get("meta") or {}).get("topology") or "").upper()
        if code and doc.get("peak_rate"):
            peaks[code] = max(peaks.get(code, 0.0), float(doc["peak_rate"]))
    app = (cfg.topology or "").upper()
    if not cfg.dataset:
        raise ConfigError("plan needs --dataset")
    df = build_app(app, cfg.dataset, cfg.fixture or "unused.csv")
    rate = cfg.rate or datasets.profile(cfg.dataset).peak_rate_at_1000x * cfg.scale / 1000.0
    aux = [t.name for t in df.tasks if t.params.get("auxiliary")]
    rates = task_input_rates(df, None, aux, unknown_gain=1.0)
    rows = []
    for name, per_msg in rates.items():
        code = PROXY_CODES.get(name)
        need = per_msg * rate
        peak = peaks.get(code) if code else None
        suggested = max(1, math.ceil(need / peak)) if peak else None
        rows.append({"task": name, "proxy": code, "input_rate": round(need, 3), "peak_rate": peak,
                     "parallelism": suggested})
    return rows


# click wiring ------------------------------------------------------------------

_COMMON = [
    click.option("--topology", "-t", help="Catalog code, STATS/PRED, or a dataflow document."),
    click.option("--dataset", help="CITY or TAXI."),
    click.option("--fixture", type=click.Path(dir_okay=False), help="Dataset CSV to replay."),
    click.option("--rate", type=float, help="Constant input rate (msg/s)."),
    click.option("--scale", type=float, help="Temporal scaling factor for replay."),
    click.option("--duration", type=DurationType(), help="Run length, e.g. 60s or 2m."),
    click.option("--seed", type=int, help="Seed recorded in the report."),
    click.option("--out", type=click.Path(file_okay=False), help="Report directory."),
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                 help="YAML/JSON run document."),
    click.option("--parallelism", "-p", multiple=True, metavar="TASK=N", help="Per-task parallelism override."),
]


def _common(fn):
    for opt in reversed(_COMMON):
        fn = opt(fn)
    return fn


def _config(config_path, positional=None, parallelism=(), **flags) -> RunConfig:
    cfg = RunConfig.load(config_path) if config_path else RunConfig()
    if positional and not flags.get("topology"):
        flags["topology"] = positional
    par = dict(cfg.parallelism)
    for item in parallelism:
        name, sep, n = item.partition("=")
        if not sep or not n.strip().isdigit():
            raise ConfigError(f"bad parallelism override {item!r}; expected TASK=N")
        par[name.strip()] = int(n)
    return cfg.merge({**flags, "parallelism": par}).check()


def _guard(fn, *args) -> int:
    try:
        return fn(*args)
    except (ConfigError, ModelError, KeyError, ValueError) as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except (StartupError, TimeoutError, OSError) as exc:
        click.echo(f"run failed: {exc}", err=True)
        return EXIT_RUN


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", count=True, help="More logging (repeatable).")
def cli(verbose: int) -> None:
    """Benchmark streaming IoT dataflows."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@cli.command()
@click.argument("code", required=False)
@_common
@click.option("--search-peak", is_flag=True, help="Find the peak sustained rate first, then run at it.")
def micro(code, search_peak, config_path, parallelism, **flags):
    """Run one catalog task between a random-integer source and a sink."""
    sys.exit(_guard(lambda: run_micro(_config(config_path, code, parallelism, **flags), search_peak)))


@cli.command("search-peak")
@click.argument("code", required=False)
@_common
def search_peak_cmd(code, config_path, parallelism, **flags):
    """Peak sustained input rate of a catalog task."""
    sys.exit(_guard(lambda: run_micro(_config(config_path, code, parallelism, **flags), True)))


@cli.command()
@click.argument("app", required=False)
@_common
def app(app, config_path, parallelism, **flags):
    """Run the STATS or PRED application over a replayed dataset."""
    sys.exit(_guard(lambda: run_app(_config(config_path, app, parallelism, **flags))))


@cli.command("plan")
@click.argument("reports", nargs=-1, type=click.Path(exists=True))
@_common
def plan_cmd(reports, config_path, parallelism, **flags):
    """Suggest per-task parallelism for an application from micro-benchmark reports."""

    def go() -> int:
        cfg = _config(config_path, None, parallelism, **flags)
        rows = plan(list(reports), cfg)
        click.echo(f"{'task':<16}{'proxy':<7}{'input msg/s':>14}{'peak msg/s':>14}{'parallelism':>13}")
        for r in rows:
            peak = "?" if r["peak_rate"] is None else f"{r['peak_rate']:.1f}"
            par = "?" if r["parallelism"] is None else str(r["parallelism"])
            click.echo(f"{r['task']:<16}{r['proxy'] or '-':<7}{r['input_rate']:>14.1f}{peak:>14}{par:>13}")
        if flags.get("out"):
            out = Path(flags["out"])
            out.mkdir(parents=True, exist_ok=True)
            (out / "plan.json").write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
        return EXIT_OK

    sys.exit(_guard(go))


@cli.command("report")
@click.argument("telemetry", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), required=True, help="Report directory.")
def report_cmd(telemetry, out):
    """Rebuild report files from a saved telemetry.json."""

    def go() -> int:
        tel = Telemetry.load(telemetry)
        report, _ = emit_report(tel, out)
        return _finish(report, tel.failures, Path(out))

    sys.exit(_guard(go))


def main(argv: Optional[list[str]] = None) -> None:
    cli.main(args=argv, prog_name="iotbench", auto_envvar_prefix="IOTBENCH")


if __name__ == "__main__":
    main()

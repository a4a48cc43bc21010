from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from iotbench.cli import EXIT_CONFIG, EXIT_EMPTY, EXIT_OK, RunConfig, cli, parse_duration
from iotbench.metrics import REPORT_FILES
from iotbench.runtime import Telemetry
from iotbench.runtime.config import ConfigError


def invoke(args, env=None):
    runner = CliRunner()
    return runner.invoke(cli, args, env=env, auto_envvar_prefix="IOTBENCH", catch_exceptions=False)


@pytest.mark.parametrize("text,seconds", [("60s", 60), ("2m", 120), ("500ms", 0.5), ("1h", 3600), ("7", 7),
                                          (3.5, 3.5)])
def test_parse_duration(text, seconds):
    assert parse_duration(text) == pytest.approx(seconds)


def test_parse_duration_rejects_garbage():
    with pytest.raises(ValueError):
        parse_duration("soon")


def test_micro_run_writes_report(tmp_path):
    out = tmp_path / "avg"
    res = invoke(["micro", "AVG", "--rate", "1000", "--duration", "2s", "--out", str(out), "--seed", "5"])
    assert res.exit_code == EXIT_OK, res.output
    for name in REPORT_FILES + ("telemetry.json", "config.json"):
        assert (out / name).is_file(), name
    cfg = json.loads((out / "config.json").read_text())
    assert (cfg["topology"], cfg["rate"], cfg["duration"], cfg["seed"]) == ("AVG", 1000.0, 2.0, 5)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["sigma"] == pytest.approx(0.1)
    assert summary["meta"]["topology"] == "AVG"


def test_report_regeneration_is_byte_identical(tmp_path):
    out = tmp_path / "run"
    assert invoke(["micro", "KAL", "--rate", "500", "--duration", "2s", "--out", str(out)]).exit_code == 0
    again = tmp_path / "again"
    res = invoke(["report", str(out / "telemetry.json"), "--out", str(again)])
    assert res.exit_code == EXIT_OK, res.output
    for name in REPORT_FILES:
        assert (out / name).read_bytes() == (again / name).read_bytes(), name


def test_unknown_topology_is_config_error(tmp_path):
    res = invoke(["micro", "FOO", "--duration", "1s", "--out", str(tmp_path)])
    assert res.exit_code == EXIT_CONFIG
    assert "unknown topology" in res.output


def test_bad_values_are_config_errors(tmp_path):
    assert invoke(["micro", "AVG", "--rate", "-5", "--out", str(tmp_path)]).exit_code == EXIT_CONFIG
    assert invoke(["micro", "AVG", "-p", "avg", "--out", str(tmp_path)]).exit_code == EXIT_CONFIG
    assert invoke(["app", "STATS", "--out", str(tmp_path)]).exit_code == EXIT_CONFIG  # no dataset
    assert invoke(["app", "ETL", "--dataset", "CITY", "--out", str(tmp_path)]).exit_code == EXIT_CONFIG
    res = invoke(["micro", "AVG", "--duration", "forever"])
    assert res.exit_code == 2 and "bad duration" in res.output  # click usage error


def test_env_var_supplies_option(tmp_path):
    out = tmp_path / "env"
    res = invoke(["micro", "XML", "--duration", "1s", "--out", str(out)], env={"IOTBENCH_MICRO_RATE": "300"})
    assert res.exit_code == EXIT_OK, res.output
    assert json.loads((out / "config.json").read_text())["rate"] == 300.0


def test_config_file_and_flag_precedence(tmp_path):
    doc = tmp_path / "run.yaml"
    doc.write_text("topology: DTC\nrate: 200\nduration: 1s\nseed: 9\n")
    out = tmp_path / "cfg"
    res = invoke(["micro", "--config", str(doc), "--rate", "400", "--out", str(out)])
    assert res.exit_code == EXIT_OK, res.output
    cfg = json.loads((out / "config.json").read_text())
    assert (cfg["topology"], cfg["rate"], cfg["seed"]) == ("DTC", 400.0, 9)


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("topology: AVG\nbogus: 1\n")
    res = invoke(["micro", "--config", str(bad)])
    assert res.exit_code == EXIT_CONFIG and "bogus" in res.output
    listy = tmp_path / "list.yaml"
    listy.write_text("- a\n- b\n")
    assert invoke(["micro", "--config", str(listy)]).exit_code == EXIT_CONFIG
    with pytest.raises(ConfigError):
        RunConfig(backend="local").check()


def test_dataflow_document_as_topology(tmp_path):
    doc = tmp_path / "df.yaml"
    doc.write_text(
        "name: doc\n"
        "tasks:\n"
        "  - {name: source, kind: source, impl: random_integers, params: {rate: 200}}\n"
        "  - {name: k, kind: transform, impl: kalman, stateful: true}\n"
        "  - {name: sink, kind: sink, impl: log_sink}\n"
        "edges:\n"
        "  - {from: source, to: k, routing: hash, field: value}\n"
        "  - {from: k, to: sink}\n"
    )
    out = tmp_path / "doc"
    res = invoke(["micro", str(doc), "--duration", "1s", "--out", str(out), "-p", "k=2"])
    assert res.exit_code == EXIT_OK, res.output
    counts = (out / "counts.csv").read_text().splitlines()
    assert any(line.startswith("k,2,") for line in counts)


def test_empty_run_exits_with_no_data(tmp_path):
    src = tmp_path / "run"
    assert invoke(["micro", "AVG", "--rate", "200", "--duration", "1s", "--out", str(src)]).exit_code == 0
    tel = Telemetry.load(src / "telemetry.json")
    tel.emit_buckets, tel.arrival_buckets = {}, {}
    tel.latency_ids, tel.latency_ingress, tel.latency_arrival = [], [], []
    tel.save(tmp_path / "empty.json")
    res = invoke(["report", str(tmp_path / "empty.json"), "--out", str(tmp_path / "empty")])
    assert res.exit_code == EXIT_EMPTY
    assert "no data" in res.output


def test_plan_from_peak_reports(tmp_path):
    reports = []
    for code, peak in (("XML", 1000.0), ("BLF", 50_000.0), ("KAL", 4000.0)):
        d = tmp_path / code
        d.mkdir()
        (d / "summary.json").write_text(json.dumps({"meta": {"topology": code}, "peak_rate": peak}))
        reports.append(str(d))
    out = tmp_path / "plan"
    res = invoke(["plan", *reports, "--topology", "STATS", "--dataset", "CITY", "--rate", "5000", "--out", str(out)])
    assert res.exit_code == EXIT_OK, res.output
    rows = {r["task"]: r for r in json.loads((out / "plan.json").read_text())}
    n_obs = 5
    assert rows["parse"]["input_rate"] == 5000
    assert rows["parse"]["parallelism"] == 5
    assert rows["bloom"]["input_rate"] == 5000 * n_obs
    assert rows["bloom"]["parallelism"] == 1
    assert rows["kalman"]["parallelism"] == 7
    assert rows["avg"]["parallelism"] is None  # no report for its proxy


def test_app_run_small(tmp_path):
    out = tmp_path / "pred"
    res = invoke(["app", "PRED", "--dataset", "TAXI", "--out", str(out), "--scale", "4000"])
    assert res.exit_code == EXIT_OK, res.output
    assert "fixture:" in res.output
    summary = json.loads((out / "summary.json").read_text())
    assert summary["meta"]["dataset"] == "TAXI"
    assert summary["latency_ms"]["count"] > 0

import json
import shutil
from pathlib import Path

import pytest

from awe.cli import main
from awe.sim import load_scenario, run
from awe.verify import failed_checks, read_trace, verify_result, verify_trace, write_trace

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def test_run_ten_seeds_writes_traces_and_summary(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--scenario", str(SCENARIOS / "basic.json"), "--seed", "100", "--runs", "10", "--out", str(out)])
    assert code == 0
    assert len(list(out.glob("trace-*.jsonl"))) == 10
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and len(summary["runs"]) == 10
    row = summary["runs"][0]
    for key in ("scenario", "seed", "writes", "reads", "linearizable", "wait_free", "amnesic", "bandwidth",
                "max_fragments_per_node", "runtime_s"):
        assert key in row
    assert "10/10 runs passed" in capsys.readouterr().out


def test_check_accepts_trace_from_run(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--scenario", str(SCENARIOS / "basic.json"), "--runs", "1", "--out", str(out)]) == 0
    trace = next(out.glob("trace-*.jsonl"))
    verdict = tmp_path / "verdict.json"
    assert main(["check", str(trace), "--json", str(verdict)]) == 0
    doc = json.loads(verdict.read_text())
    assert doc["passed"] and doc["checks"]["linearizable"]


def test_run_then_check_equals_inline_check(tmp_path):
    sc = load_scenario(SCENARIOS / "basic.json")
    for seed in range(3):
        res = run(sc.with_seed(seed), seed, record_trace=True)
        path = tmp_path / f"{seed}.jsonl"
        write_trace(path, res.trace)
        inline = failed_checks(verify_result(res))
        stored = failed_checks(verify_trace(read_trace(path)))
        stored.pop("fifo", None)
        assert inline == stored


def test_undersized_cluster_reports_write_starved(capsys):
    code = main(["run", "--scenario", str(SCENARIOS / "starved.json")])
    assert code != 0
    assert "write starved" in capsys.readouterr().out


def test_malformed_config_lists_fields(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"n": 3, "t": 1, "k": 0, "m": 2, "ell": "big"}))
    assert main(["run", "--scenario", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "ell: expected integer" in err and "k: must be in" in err


def test_missing_scenario_file(tmp_path, capsys):
    assert main(["run", "--scenario", str(tmp_path / "nope.json")]) == 2


def test_stale_read_trace_fails_with_pair(tmp_path, capsys):
    from awe.core import SystemConfig
    from awe.sim import Scenario, Workload

    sc = Scenario(SystemConfig(n=3, t=1, k=1, m=1, ell=8), workload=Workload(scripts=(("write", "write", "read"),)))
    events = run(sc, 0, record_trace=True).trace
    first = next(e for e in events if e["kind"] == "invoke" and e["payload"]["type"] == "write")
    resp = next(e for e in events if e["kind"] == "respond" and e["payload"]["type"] == "read")
    resp["payload"]["value"] = first["payload"]["value"]
    path = tmp_path / "stale.jsonl"
    write_trace(path, events)
    assert main(["check", str(path)]) == 1
    out = capsys.readouterr().out
    assert "linearizable       FAIL" in out and "(ops (1, 2))" in out


def test_empty_trace_passes(tmp_path):
    p = tmp_path / "empty.jsonl"
    p.write_text("")
    assert main(["check", str(p)]) == 0


def test_unparsable_trace_is_reported(tmp_path, capsys):
    p = tmp_path / "junk.jsonl"
    p.write_text("{oops\n")
    assert main(["check", str(p)]) == 2
    assert "line 1" in capsys.readouterr().err


def test_exhaustive_mode(tmp_path, capsys):
    out = tmp_path / "ex"
    assert main(["run", "--scenario", str(SCENARIOS / "exhaustive.json"), "--depth", "8", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["passed"] and summary["depth"] == 8 and summary["states"] > 0


def test_fairness_flag_overrides_scenario(tmp_path):
    out = tmp_path / "f"
    assert main(["run", "--scenario", str(SCENARIOS / "basic.json"), "--fairness-bound", "5", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["scenario"]["schedule"]["fairness"] == 5

import json

import pytest

from awe.core import SystemConfig
from awe.faults import AdversarySpec
from awe.sim import (
    Scenario,
    ScenarioError,
    Schedule,
    Simulation,
    Workload,
    explore,
    load_scenario,
    run,
    workload_generate,
)
from awe.verify import check_fifo, failed_checks, verify_result, write_trace


def scenario(n=4, t=1, k=1, m=2, ell=16, **kw):
    return Scenario(SystemConfig(n=n, t=t, k=k, m=m, ell=ell), **kw)


# workload -----------------------------------------------------------------------

def test_write_only_and_read_only_mixes():
    w = workload_generate(0.0, 5, 8, m=2, seed=1)
    assert all(kind == "write" for s in w for kind, _ in s)
    r = workload_generate(1.0, 5, 8, m=2, seed=1)
    assert all(kind == "read" and v is None for s in r for kind, v in s)


def test_workload_values_unique_and_sized():
    w = workload_generate(0.3, 40, 3, m=4, seed=9)
    values = [v for s in w for kind, v in s if kind == "write"]
    assert len(values) == len(set(values)) and all(len(v) == 3 for v in values)


def test_workload_reproducible():
    assert workload_generate(0.5, 10, 16, 3, seed=4) == workload_generate(0.5, 10, 16, 3, seed=4)
    assert workload_generate(0.5, 10, 16, 3, seed=4) != workload_generate(0.5, 10, 16, 3, seed=5)


def test_workload_rejects_impossible_sizes():
    with pytest.raises(ValueError):
        workload_generate(0.0, 300, 1, m=1)
    with pytest.raises(ValueError):
        workload_generate(0.0, 1, 0)


def test_reads_without_writes_all_return_bottom():
    res = run(scenario(workload=Workload(mix=1.0, ops=5)), seed=3)
    assert all(op.result is None for op in res.ops) and len(res.ops) == 10


# scenario documents ---------------------------------------------------------------

def test_scenario_roundtrip(tmp_path):
    sc = scenario(adversary=AdversarySpec({2: "stale-replay"}, {1: 40}), schedule=Schedule(seed=5, fairness=30))
    path = tmp_path / "s.json"
    path.write_text(json.dumps(sc.to_dict()))
    again = load_scenario(path)
    assert again.to_dict() == sc.to_dict() and again.digest() == sc.digest()


def test_scenario_field_errors():
    with pytest.raises(ScenarioError) as exc:
        Scenario.from_dict({"n": 3, "t": 1, "k": "two", "m": 0, "schedule": {"policy": "chaos"}})
    msgs = exc.value.errors
    assert any(e.startswith("k:") for e in msgs)
    assert any(e.startswith("ell: missing") for e in msgs)
    assert any(e.startswith("m:") for e in msgs)
    assert any(e.startswith("schedule.policy") for e in msgs)


def test_resilience_violation_needs_explicit_override():
    doc = {"n": 2, "t": 1, "k": 1, "m": 1, "ell": 4}
    with pytest.raises(ScenarioError, match="2t\\+k"):
        Scenario.from_dict(doc)
    assert Scenario.from_dict(dict(doc, allow_unsafe=True)).allow_unsafe


def test_too_many_byzantine_nodes_rejected():
    with pytest.raises(ScenarioError, match="exceed"):
        scenario(adversary=AdversarySpec({0: "silent", 1: "silent"})).validate()


def test_bad_json_reported(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{nope")
    with pytest.raises(ScenarioError, match="<json>"):
        load_scenario(p)


# runs ------------------------------------------------------------------------------

def test_same_seed_gives_identical_trace(tmp_path):
    sc = scenario(adversary=AdversarySpec({1: "wrong-timestamp"}), workload=Workload(ops=15))
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_trace(a, run(sc, 11, record_trace=True).trace)
    write_trace(b, run(sc, 11, record_trace=True).trace)
    assert a.read_bytes() == b.read_bytes()
    write_trace(b, run(sc, 12, record_trace=True).trace)
    assert a.read_bytes() != b.read_bytes()


def test_trace_is_fifo_per_channel():
    res = run(scenario(m=3, workload=Workload(ops=20)), 2, record_trace=True)
    assert check_fifo(res.trace) == []
    fields = {"step", "kind", "src", "dst", "payload"}
    assert all(set(ev) == fields for ev in res.trace)
    assert res.trace[0]["kind"] == "config"


def test_long_random_run_passes_every_check():
    sc = scenario(n=4, t=1, k=1, m=2, workload=Workload(ops=100), adversary=AdversarySpec({0: "corrupt-fragment"}))
    res = run(sc, 1)
    assert len(res.ops) == 200
    assert failed_checks(verify_result(res)) == {}


def test_scripted_schedule_follows_actions():
    sc = scenario(n=3, t=1, k=1, m=2, schedule=Schedule(policy="scripted", script=(
        "invoke:c1", "deliver:c1>dir", "deliver:dir>c1", "invoke:c0",
    )), workload=Workload(scripts=(("write",), ("read",))))
    res = run(sc, 0)
    read, write = res.ops
    assert read.kind == "read" and read.result is None
    assert write.kind == "write" and write.resp is not None


def test_scripted_schedule_rejects_disabled_action():
    sc = scenario(schedule=Schedule(policy="scripted", script=("deliver:d0>c0",)),
                  workload=Workload(scripts=(("write",), ())))
    with pytest.raises(ValueError, match="not enabled"):
        run(sc, 0)


def test_crash_at_step_zero_contributes_nothing():
    sc = scenario(adversary=AdversarySpec(client_crashes={0: 0}), workload=Workload(ops=5))
    res = run(sc, 4)
    assert 0 in res.crashed and all(op.client == 1 for op in res.ops)
    assert failed_checks(verify_result(res)) == {}


def test_crash_mid_write_leaves_pending_operation():
    sc = scenario(m=2, adversary=AdversarySpec(client_crashes={0: 6}), workload=Workload(mix=0.0, ops=4))
    res = run(sc, 0)
    pending = [op for op in res.ops if op.resp is None]
    assert pending and all(op.client == 0 for op in pending)
    assert failed_checks(verify_result(res)) == {}


def test_silent_majority_starves_writer():
    sc = Scenario(SystemConfig(n=2, t=1, k=1, m=1, ell=4), allow_unsafe=True,
                  schedule=Schedule(fairness=20), adversary=AdversarySpec({1: "silent"}),
                  workload=Workload(scripts=(("write",),)), max_steps=1000)
    res = run(sc, 0)
    assert any("write starved" in s for s in res.starved)


def test_quiescent_points_are_recorded():
    res = run(scenario(workload=Workload(ops=10)), 3)
    assert res.quiescent[0].stored_bytes == 0
    assert len(res.quiescent) >= 2


def test_clone_is_independent():
    sim = Simulation(scenario(workload=Workload(ops=3)), 0)
    for _ in range(10):
        sim.apply(sim.enabled_actions()[0])
    twin = sim.clone()
    assert twin.state_key() == sim.state_key()
    twin.apply(twin.enabled_actions()[-1])
    assert twin.state_key() != sim.state_key()
    assert sim.run().completed and twin.run().completed


def test_exhaustive_fault_free_small_instance():
    sc = Scenario(SystemConfig(n=3, t=0, k=1, m=2, ell=4),
                  schedule=Schedule(policy="exhaustive", depth=12),
                  workload=Workload(scripts=(("write",), ("read",))))
    res = explore(sc, check=lambda sim: list(failed_checks(verify_result(sim.result()))))
    assert res.failures == [] and res.leaves > 1


def test_exhaustive_finds_injected_bug(monkeypatch):
    # dropping the freeze step must be caught by exploration; the read has
    # to overlap two writes of one writer, which needs 18 choice points
    from awe import client

    monkeypatch.setattr(client.Client, "_collect_and_free", _no_retention)
    sc = Scenario(SystemConfig(n=3, t=1, k=1, m=2, ell=4),
                  schedule=Schedule(policy="exhaustive", depth=18),
                  workload=Workload(scripts=(("write", "write"), ("read",))))
    res = explore(sc, check=lambda sim: list(failed_checks(verify_result(sim.result()))))
    assert res.failures
    assert any("retention" in p for _, problems in res.failures for p in problems)


def _no_retention(self, M):
    from awe.client import Phase
    from awe.messages import NodeFree

    self.phase = Phase.FREEING
    tss = frozenset({self.prevptr.ts})
    for j in range(self.cfg.n):
        self.net.send(self.c, j, NodeFree(tss))
    self.phase = Phase.IDLE
    self.pending_value = None
    self.net.respond(self.c, None, self.writeptr.ts)

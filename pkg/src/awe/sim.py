"""Deterministic discrete-event simulator for the register protocol.

Every client, data node and the directory is a component; each ordered pair
of components has a FIFO channel. One scheduler step either delivers the head
of some channel or lets an idle client invoke its next operation. Which step
happens is up to the adversarial schedule:

* ``random``     seeded weighted choice with a fairness bound,
* ``scripted``   an explicit list of actions, then the canonical order,
* ``exhaustive`` every interleaving up to a number of choice points
                 (see :func:`explore`).

A delivery to the directory is the atomicity point of that directory
operation; the request and response hops around it are independent events.
"""

from __future__ import annotations

import copy
import hashlib
import json
import random
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Optional, Sequence

from .client import DIR as CLIENT_DIR
from .client import Client, Phase
from .core import (
    T0,
    Pointer,
    ProtocolInvariantError,
    SystemConfig,
    Timestamp,
)
from .directory import SnapshotDirectory
from .erasure import codec_params
from .faults import STRATEGIES, AdversarySpec, ByzantineNode, make_node, mix64
from .messages import (
    DirScan,
    DirUpdate,
    FreeAck,
    NodeFree,
    NodeRead,
    ReadResp,
    ScanResp,
    UpdateAck,
    data_bytes,
    message_to_json,
    metadata_bytes,
)

POLICIES = ("random", "scripted", "exhaustive")


class ScenarioError(ValueError):
    """Invalid scenario document; ``errors`` holds one message per bad field."""

    def __init__(self, errors: Sequence[str]) -> None:
        super().__init__("invalid scenario: " + "; ".join(errors))
        self.errors = list(errors)


# scenario ---------------------------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    policy: str = "random"
    seed: int = 0
    fairness: Optional[int] = 500
    drain_prob: float = 0.1
    depth: int = 14
    script: tuple = ()


@dataclass(frozen=True)
class Workload:
    mix: float = 0.5
    ops: int = 10
    scripts: Optional[tuple] = None
    """Explicit per-client kinds, e.g. ``(("write", "read"), ("read",))``."""


@dataclass(frozen=True)
class Scenario:
    config: SystemConfig
    schedule: Schedule = Schedule()
    adversary: AdversarySpec = AdversarySpec()
    workload: Workload = Workload()
    allow_unsafe: bool = False
    max_steps: int = 2_000_000

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "Scenario":
        errors: list[str] = []
        if not isinstance(doc, Mapping):
            raise ScenarioError(["<root>: scenario must be a JSON object"])

        def need_int(key: str, d: Mapping, prefix: str = "", default: Any = ...) -> Any:
            if key not in d:
                if default is ...:
                    errors.append(f"{prefix}{key}: missing")
                    return None
                return default
            v = d[key]
            if not isinstance(v, int) or isinstance(v, bool):
                errors.append(f"{prefix}{key}: expected integer, got {v!r}")
                return None
            return v

        n, t, k, m, ell = (need_int(f, doc) for f in ("n", "t", "k", "m", "ell"))
        allow_unsafe = bool(doc.get("allow_unsafe", False))

        sched_doc = doc.get("schedule", {})
        if not isinstance(sched_doc, Mapping):
            errors.append("schedule: expected object")
            sched_doc = {}
        policy = sched_doc.get("policy", "random")
        if policy not in POLICIES:
            errors.append(f"schedule.policy: expected one of {POLICIES}, got {policy!r}")
        seed = need_int("seed", sched_doc, "schedule.", 0)
        fairness = sched_doc.get("fairness", 500)
        if fairness is not None and (not isinstance(fairness, int) or fairness < 1):
            errors.append(f"schedule.fairness: expected positive integer or null, got {fairness!r}")
        drain = sched_doc.get("drain_prob", 0.1)
        if not isinstance(drain, (int, float)) or not 0 <= drain <= 1:
            errors.append(f"schedule.drain_prob: expected number in [0, 1], got {drain!r}")
        depth = need_int("depth", sched_doc, "schedule.", 14)
        script = sched_doc.get("script", [])
        if not isinstance(script, list) or not all(isinstance(s, str) for s in script):
            errors.append("schedule.script: expected list of action strings")
            script = []

        adv_doc = doc.get("adversary", {})
        if not isinstance(adv_doc, Mapping):
            errors.append("adversary: expected object")
            adv_doc = {}
        byz: dict[int, str] = {}
        for j, entry in enumerate(adv_doc.get("nodes", [])):
            if not isinstance(entry, Mapping) or "id" not in entry or "strategy" not in entry:
                errors.append(f"adversary.nodes[{j}]: expected {{id, strategy}}")
                continue
            if entry["id"] in byz:
                errors.append(f"adversary.nodes[{j}]: node {entry['id']} listed twice")
            byz[entry["id"]] = entry["strategy"]
        crashes: dict[int, int] = {}
        for key, step in dict(adv_doc.get("client_crashes", {})).items():
            try:
                crashes[int(key)] = int(step)
            except (TypeError, ValueError):
                errors.append(f"adversary.client_crashes: bad entry {key!r}: {step!r}")

        wl_doc = doc.get("workload", {})
        if not isinstance(wl_doc, Mapping):
            errors.append("workload: expected object")
            wl_doc = {}
        mix = wl_doc.get("mix", 0.5)
        if not isinstance(mix, (int, float)) or not 0 <= mix <= 1:
            errors.append(f"workload.mix: expected number in [0, 1], got {mix!r}")
        ops = need_int("ops", wl_doc, "workload.", 10)
        if ops is not None and ops < 0:
            errors.append(f"workload.ops: must be >= 0, got {ops}")
        scripts = wl_doc.get("scripts")
        if scripts is not None:
            if not isinstance(scripts, list) or not all(
                isinstance(s, list) and all(x in ("write", "read") for x in s) for s in scripts
            ):
                errors.append("workload.scripts: expected list of lists of 'write'/'read'")
                scripts = None
            else:
                scripts = tuple(tuple(s) for s in scripts)

        max_steps = need_int("max_steps", doc, "", 2_000_000)

        nums = {"n": n, "t": t, "k": k, "m": m, "ell": ell}
        bad = {f for f, v in nums.items() if v is None}
        if bad:
            # still report range problems of the fields that did parse
            filled = [1 if v is None else v for v in nums.values()]
            errors += [e for e in _config_errors(*filled) if e.split(":")[0] not in bad]
        if errors:
            raise ScenarioError(errors)
        try:
            config = SystemConfig(n=n, t=t, k=k, m=m, ell=ell)
        except ValueError:
            raise ScenarioError(_config_errors(n, t, k, m, ell)) from None
        scenario = cls(
            config=config,
            schedule=Schedule(policy, seed, fairness, float(drain), depth, tuple(script)),
            adversary=AdversarySpec(byz, crashes, seed),
            workload=Workload(float(mix), ops, scripts),
            allow_unsafe=allow_unsafe,
            max_steps=max_steps,
        )
        scenario.validate()
        return scenario

    def validate(self) -> None:
        cfg = self.config
        errors = cfg.field_errors(strict=not self.allow_unsafe)
        errors += self.adversary.field_errors(cfg.n, cfg.t, cfg.m)
        if self.workload.scripts is not None and len(self.workload.scripts) != cfg.m:
            errors.append(f"workload.scripts: need one script per client (m={cfg.m})")
        if errors:
            raise ScenarioError(errors)

    def to_dict(self) -> dict:
        c, s, a, w = self.config, self.schedule, self.adversary, self.workload
        doc: dict[str, Any] = {
            "n": c.n, "t": c.t, "k": c.k, "m": c.m, "ell": c.ell,
            "schedule": {
                "policy": s.policy, "seed": s.seed, "fairness": s.fairness,
                "drain_prob": s.drain_prob, "depth": s.depth, "script": list(s.script),
            },
            "adversary": {
                "nodes": [{"id": i, "strategy": st} for i, st in sorted(a.byzantine_nodes.items())],
                "client_crashes": {str(cid): st for cid, st in sorted(a.client_crashes.items())},
            },
            "workload": {"mix": w.mix, "ops": w.ops},
            "max_steps": self.max_steps,
        }
        if w.scripts is not None:
            doc["workload"]["scripts"] = [list(x) for x in w.scripts]
        if self.allow_unsafe:
            doc["allow_unsafe"] = True
        return doc

    def digest(self) -> str:
        raw = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(raw).hexdigest()[:16]

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, schedule=replace(self.schedule, seed=seed),
                       adversary=replace(self.adversary, seed=seed))


def _config_errors(n, t, k, m, ell) -> list[str]:
    cfg = object.__new__(SystemConfig)
    for f, v in zip(("n", "t", "k", "m", "ell", "lam"), (n, t, k, m, ell, 256)):
        object.__setattr__(cfg, f, v)
    return cfg.field_errors(strict=False)


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError([f"<json>: {exc}"]) from None
    return Scenario.from_dict(doc)


# workload -------------------------------------------------------------------

def workload_generate(
    mix: float,
    ops: int,
    ell: int,
    m: int = 1,
    seed: int = 0,
    kinds: Optional[Sequence[Sequence[str]]] = None,
) -> list[list[tuple[str, Optional[bytes]]]]:
    """Per-client operation streams with globally unique write values.

    Every written value starts with a big-endian id unique across the run,
    followed by seeded filler up to ``ell`` bytes.
    """
    if ell < 1:
        raise ValueError("ell must be >= 1")
    rng = random.Random(mix64(seed, 0x57))
    if kinds is None:
        kinds = [["read" if rng.random() < mix else "write" for _ in range(ops)] for _ in range(m)]
    total = sum(len(s) for s in kinds)
    width = max(1, (total.bit_length() + 7) // 8)
    if width > ell:
        raise ValueError(f"ell={ell} bytes cannot hold {total} distinct values")
    out = []
    uid = 0
    for script in kinds:
        stream = []
        for kind in script:
            if kind == "write":
                uid += 1
                body = uid.to_bytes(width, "big") + rng.randbytes(ell - width)
                stream.append(("write", body))
            else:
                stream.append(("read", None))
        out.append(stream)
    return out


# run records ------------------------------------------------------------------

@dataclass
class OpRecord:
    id: int
    client: int
    kind: str
    value: Optional[bytes]
    inv: int
    resp: Optional[int] = None
    result: Optional[bytes] = None
    ts: Optional[Timestamp] = None
    frozen_from: Optional[int] = None
    """For reads: the writer whose frozen pointer was selected, if any."""


@dataclass(frozen=True)
class QuiescentPoint:
    step: int
    fragments: tuple
    """Fragments held per node; ``None`` for Byzantine nodes."""
    stored_bytes: int


@dataclass
class RunResult:
    scenario: Scenario
    seed: int
    ops: list[OpRecord]
    quiescent: list[QuiescentPoint]
    op_bytes: dict
    violations: list[str]
    starved: list[str]
    crashed: frozenset
    steps: int
    dir_log: list
    trace: Optional[list[dict]] = None
    frozen_reads: int = 0

    @property
    def completed(self) -> bool:
        return not self.starved


def component_name(cid: int, m: int, n: int) -> str:
    if cid < m:
        return f"c{cid}"
    if cid < m + n:
        return f"d{cid - m}"
    return "dir"


# simulator --------------------------------------------------------------------

class Simulation:
    """One execution of a scenario; use :func:`run` unless stepping by hand."""

    def __init__(self, scenario: Scenario, seed: Optional[int] = None, record_trace: bool = False) -> None:
        scenario.validate()
        self.scenario = scenario
        cfg = self.cfg = scenario.config
        self.seed = scenario.schedule.seed if seed is None else seed
        self.record_trace = record_trace
        m, n = cfg.m, cfg.n
        self.m, self.n = m, n
        self.DIR = m + n
        self.width = m + n + 1
        self.codec = codec_params(n, cfg.k)
        adversary = AdversarySpec(scenario.adversary.byzantine_nodes, scenario.adversary.client_crashes, self.seed)
        self.adversary = adversary
        self.clients = [Client(c, cfg, self.codec, self) for c in range(m)]
        self.nodes = [make_node(i, adversary) for i in range(n)]
        self.dir = SnapshotDirectory(m, n)
        wl = scenario.workload
        self.scripts = workload_generate(wl.mix, wl.ops, cfg.ell, m, self.seed, wl.scripts)
        self.script_pos = [0] * m
        self.channels: dict[int, deque] = {}
        self.chan_seq: dict[int, int] = {}
        self.ready: dict[int, int] = {}  # channel -> step its head became deliverable
        self.nmsgs = 0
        self.steps = 0
        self.clock = 0
        self.crashed: set[int] = set()
        self.crash_at = dict(adversary.client_crashes)
        self.current_op: list[Optional[OpRecord]] = [None] * m
        self.idle_since = [0] * m
        self.active_live = 0
        self.ops: list[OpRecord] = []
        self.op_bytes: dict[int, list[int]] = {}
        self.quiescent: list[QuiescentPoint] = []
        self.violations: list[str] = []
        self.dir_log: list[tuple[int, int, int, str]] = []
        self.inflight_reads: dict[int, list] = {}
        self.frozen_reads = 0
        self.draining = False
        self.trace: Optional[list[dict]] = [] if record_trace else None
        rng = random.Random(mix64(self.seed, 0xA11))
        self.rng = rng
        # adversary speed classes: some components are much slower than others
        speeds = (1.0, 1.0, 0.3, 0.05)
        self.weight = [rng.choice(speeds) for _ in range(self.width)]
        self.weight[self.DIR] = 1.0
        self.script_actions = deque(scenario.schedule.script)
        if self.trace is not None:
            header = scenario.to_dict()
            header["seed"] = self.seed
            self._record("config", "sim", "sim", header)
        self._quiescent_check()

    # Network interface used by clients -------------------------------------

    def send(self, src: int, dst: int, msg) -> None:
        dst = self.DIR if dst == CLIENT_DIR else self.m + dst
        op = self.current_op[src]
        self._enqueue(src, dst, msg, op.id if op is not None else -1)

    def respond(self, c: int, result: Optional[bytes], ts: Timestamp) -> None:
        op = self.current_op[c]
        self.clock += 1
        op.resp = self.clock
        op.result = result
        op.ts = ts
        self.current_op[c] = None
        self.idle_since[c] = self.steps
        self.active_live -= 1
        self.inflight_reads.pop(c, None)
        if self.trace is not None:
            payload: dict[str, Any] = {"op": op.id, "type": op.kind, "ts": ts.to_json()}
            if op.kind == "read":
                payload["value"] = _digest(result)
                payload["frozen_from"] = op.frozen_from
            self._record("respond", "reg", f"c{c}", payload)
        if self.scenario.schedule.drain_prob and self.rng.random() < self.scenario.schedule.drain_prob:
            self.draining = True

    def readptr_fixed(self, c: int, ptr: Pointer, writer: int, frozen: bool) -> None:
        op = self.current_op[c]
        if frozen:
            op.frozen_from = writer
            self.frozen_reads += 1
        if ptr.ts == T0:
            return
        k = self.cfg.k
        holders = {
            i for i in ptr.set
            if self.nodes[i].honest and ptr.ts in self.nodes[i].store
        }
        if len(holders) < k:
            self.violations.append(
                f"retention: read {op.id} fixed {tuple(ptr.ts)} but only {len(holders)} correct nodes hold it"
            )
        self.inflight_reads[c] = [ptr.ts, holders, set(), op.id]

    # channels -------------------------------------------------------------

    def _enqueue(self, src: int, dst: int, msg, tag: int) -> None:
        key = src * self.width + dst
        ch = self.channels.get(key)
        if ch is None:
            ch = self.channels[key] = deque()
        seq = self.chan_seq.get(key, 0)
        self.chan_seq[key] = seq + 1
        ch.append((msg, tag, seq))
        if len(ch) == 1:
            self.ready[key] = self.steps
        self.nmsgs += 1
        if tag >= 0:
            b = self.op_bytes.get(tag)
            if b is None:
                b = self.op_bytes[tag] = [0, 0, 0]
            if src < self.m:
                b[0] += data_bytes(msg)
            b[2] += metadata_bytes(msg)

    # actions ------------------------------------------------------------------

    def invocable(self) -> list[int]:
        if self.draining:
            return []
        return [
            c for c in range(self.m)
            if self.current_op[c] is None and c not in self.crashed
            and self.script_pos[c] < len(self.scripts[c])
        ]

    def enabled_actions(self) -> list[tuple[str, int]]:
        acts = [("d", key) for key in sorted(self.ready)]
        acts += [("i", c) for c in self.invocable()]
        return acts

    def action_name(self, action: tuple[str, int]) -> str:
        kind, x = action
        if kind == "i":
            return f"invoke:c{x}"
        src, dst = divmod(x, self.width)
        return f"deliver:{component_name(src, self.m, self.n)}>{component_name(dst, self.m, self.n)}"

    def apply(self, action: tuple[str, int]) -> None:
        self.steps += 1
        if self.crash_at:
            for c, at in list(self.crash_at.items()):
                if at <= self.steps:
                    self.crash_client(c)
        kind, x = action
        if kind == "i":
            if x in self.crashed:
                return
            self._invoke(x)
        else:
            self._deliver(x)
        if self.nmsgs == 0 and self.active_live == 0:
            self._quiescent_check()

    def crash_client(self, c: int) -> None:
        """Halt client ``c``; its in-flight operation stays pending forever."""
        self.crash_at.pop(c, None)
        if c in self.crashed:
            return
        self.crashed.add(c)
        if self.current_op[c] is not None:
            self.active_live -= 1
        self.inflight_reads.pop(c, None)
        if self.trace is not None:
            self._record("crash", "adversary", f"c{c}", {"step": self.steps})

    def _invoke(self, c: int) -> None:
        kind, value = self.scripts[c][self.script_pos[c]]
        self.script_pos[c] += 1
        self.clock += 1
        op = OpRecord(len(self.ops), c, kind, value, self.clock)
        self.ops.append(op)
        self.current_op[c] = op
        self.active_live += 1
        if self.trace is not None:
            payload: dict[str, Any] = {"op": op.id, "type": kind}
            if kind == "write":
                payload["value"] = _digest(value)
                payload["len"] = len(value)
            self._record("invoke", f"c{c}", "reg", payload)
        if kind == "write":
            self.clients[c].write(value)
        else:
            self.clients[c].read()

    def _deliver(self, key: int) -> None:
        ch = self.channels[key]
        msg, tag, seq = ch.popleft()
        self.nmsgs -= 1
        if ch:
            self.ready[key] = self.steps
        else:
            del self.ready[key]
        src, dst = divmod(key, self.width)
        m = self.m
        if self.trace is not None:
            self.clock += 1
            kind = "dir-atomicity-point" if dst == self.DIR else "deliver"
            payload = message_to_json(msg)
            payload["op"] = tag
            payload["seq"] = seq
            self._record(kind, component_name(src, m, self.n), component_name(dst, m, self.n), payload)
        if dst == self.DIR:
            self._dir_atomic(src, msg, tag)
        elif dst >= m:
            node = self.nodes[dst - m]
            if self.inflight_reads and node.honest:
                self._watch_node(dst - m, src, msg)
            for reply in node.handle(msg):
                self._enqueue(dst, src, reply, tag)
        else:
            if tag >= 0 and src >= m:
                b = self.op_bytes.get(tag)
                if b is not None:
                    b[1] += data_bytes(msg)
            if dst in self.crashed:
                return
            self.clients[dst].deliver(src - m if src < self.DIR else CLIENT_DIR, msg)

    def _dir_atomic(self, c: int, msg, tag: int) -> None:
        if type(msg) is DirScan:
            self.dir_log.append((self.steps, c, tag, "scan"))
            self._enqueue(self.DIR, c, ScanResp(self.dir.scan()), tag)
        elif type(msg) is DirUpdate:
            if msg.c != c:
                raise ProtocolInvariantError(f"client {c} tried to update entry {msg.c}")
            self.dir.update(c, msg.fields)
            self.dir_log.append((self.steps, c, tag, "update"))
            self._enqueue(self.DIR, c, UpdateAck(), tag)
        else:
            raise TypeError(f"directory cannot handle {type(msg).__name__}")

    def _watch_node(self, i: int, src: int, msg) -> None:
        # a read can still finish if k correct nodes either keep the
        # fragment or have already answered with it
        store = self.nodes[i].store
        kind = type(msg)
        if kind is NodeRead:
            watch = self.inflight_reads.get(src)
            if watch is not None and watch[0] == msg.ts and msg.ts in store:
                watch[2].add(i)
        elif kind is NodeFree:
            for ts, holders, answered, opid in self.inflight_reads.values():
                if ts in msg.tss and i in holders and ts in store:
                    holders.discard(i)
                    if len(holders | answered) < self.cfg.k:
                        self.violations.append(
                            f"retention: node {i} freed {tuple(ts)} while read {opid} still needs it"
                        )

    def _quiescent_check(self) -> None:
        frags = tuple(len(nd.store) if nd.honest else None for nd in self.nodes)
        total = sum(nd.store.stored_bytes for nd in self.nodes if nd.honest)
        qp = QuiescentPoint(self.steps, frags, total)
        self.quiescent.append(qp)
        self.draining = False
        if self.trace is not None:
            self._record("quiescent", "sim", "sim", {"fragments": list(frags), "stored_bytes": total})

    def _record(self, kind: str, src: str, dst: str, payload: dict) -> None:
        self.trace.append({"step": self.steps, "kind": kind, "src": src, "dst": dst, "payload": payload})

    # scheduling ---------------------------------------------------------------

    def _choose_random(self) -> Optional[tuple[str, int]]:
        ready = self.ready
        inv = self.invocable()
        if not ready and not inv:
            return None
        fair = self.scenario.schedule.fairness
        if fair is not None:
            steps = self.steps
            if ready:
                key = min(ready, key=ready.__getitem__)
                if steps - ready[key] >= fair:
                    return ("d", key)
            for c in inv:
                if steps - self.idle_since[c] >= fair:
                    return ("i", c)
        keys = list(ready)
        total = len(keys) + len(inv)
        rng = self.rng
        w = self.weight
        width = self.width
        for _ in range(8):
            j = rng.randrange(total)
            if j < len(keys):
                src, dst = divmod(keys[j], width)
                if rng.random() < min(w[src], w[dst]):
                    return ("d", keys[j])
            else:
                c = inv[j - len(keys)]
                if rng.random() < w[c]:
                    return ("i", c)
        j = rng.randrange(total)
        return ("d", keys[j]) if j < len(keys) else ("i", inv[j - len(keys)])

    def _choose_scripted(self) -> Optional[tuple[str, int]]:
        acts = self.enabled_actions()
        if not acts:
            return None
        if self.script_actions:
            want = self.script_actions.popleft()
            for a in acts:
                if self.action_name(a) == want:
                    return a
            raise ValueError(f"scripted action {want!r} is not enabled; enabled: "
                             f"{[self.action_name(a) for a in acts]}")
        return acts[0]

    def run(self) -> RunResult:
        policy = self.scenario.schedule.policy
        choose = self._choose_scripted if policy in ("scripted", "exhaustive") else self._choose_random
        limit = self.scenario.max_steps
        try:
            while self.steps < limit:
                a = choose()
                if a is None:
                    break
                self.apply(a)
        except ProtocolInvariantError as exc:
            self.violations.append(f"invariant: {exc}")
        return self.result()

    def starved(self) -> list[str]:
        out = []
        for c in range(self.m):
            if c in self.crashed:
                continue
            op = self.current_op[c]
            if op is not None:
                out.append(f"{op.kind} starved: client {c} op {op.id} never completed")
            elif self.script_pos[c] < len(self.scripts[c]):
                out.append(f"client {c}: {len(self.scripts[c]) - self.script_pos[c]} operations never invoked")
        if self.steps >= self.scenario.max_steps and (self.ready or self.invocable()):
            out.append(f"step limit {self.scenario.max_steps} reached")
        return out

    def result(self) -> RunResult:
        starved = self.starved()
        if self.trace is not None and not getattr(self, "_closed", False):
            self._closed = True
            for v in self.violations:
                self._record("violation", "sim", "sim", {"message": v})
            for s in starved:
                self._record("starved", "sim", "sim", {"message": s})
        return RunResult(
            scenario=self.scenario,
            seed=self.seed,
            ops=self.ops,
            quiescent=self.quiescent,
            op_bytes={k: tuple(v) for k, v in self.op_bytes.items()},
            violations=list(self.violations),
            starved=starved,
            crashed=frozenset(self.crashed),
            steps=self.steps,
            dir_log=self.dir_log,
            trace=self.trace,
            frozen_reads=self.frozen_reads,
        )

    # exploration support ------------------------------------------------------

    def clone(self) -> "Simulation":
        new = copy.copy(self)
        new.clients = []
        for cl in self.clients:
            c2 = copy.copy(cl)
            c2.net = new
            c2.frozenptrlist = list(cl.frozenptrlist)
            c2.reservedptrlist = list(cl.reservedptrlist)
            c2.frozenindex = list(cl.frozenindex)
            c2.readlist = list(cl.readlist)
            c2.ackset = set(cl.ackset)
            new.clients.append(c2)
        new.nodes = []
        for nd in self.nodes:
            n2 = copy.copy(nd)
            n2.store = copy.copy(nd.store)
            n2.store.data = dict(nd.store.data)
            if isinstance(nd, ByzantineNode):
                n2.history = list(nd.history)
            new.nodes.append(n2)
        new.dir = copy.copy(self.dir)
        new.channels = {k: deque(v) for k, v in self.channels.items() if v}
        new.chan_seq = dict(self.chan_seq)
        new.ready = dict(self.ready)
        new.script_pos = list(self.script_pos)
        new.crashed = set(self.crashed)
        new.crash_at = dict(self.crash_at)
        new.ops = [copy.copy(op) for op in self.ops]
        by_id = {op.id: op for op in new.ops}
        new.current_op = [None if op is None else by_id[op.id] for op in self.current_op]
        new.idle_since = list(self.idle_since)
        new.op_bytes = {k: list(v) for k, v in self.op_bytes.items()}
        new.quiescent = list(self.quiescent)
        new.violations = list(self.violations)
        new.dir_log = list(self.dir_log)
        new.inflight_reads = {c: [ts, set(h), set(a), o] for c, (ts, h, a, o) in self.inflight_reads.items()}
        new.script_actions = deque(self.script_actions)
        new.trace = None if self.trace is None else list(self.trace)
        return new

    def history_key(self) -> tuple:
        """Real-time structure of the history so far, for state deduplication."""
        responded_at = sorted((op.resp, op.id) for op in self.ops if op.resp is not None)
        out = []
        for op in self.ops:
            before = frozenset(i for r, i in responded_at if r < op.inv)
            out.append((op.id, op.client, op.kind, op.value, before, op.resp is not None, op.result, op.ts))
        return tuple(out)

    def state_key(self) -> int:
        chans = tuple((k, tuple((msg, tag) for msg, tag, _ in ch)) for k, ch in sorted(self.channels.items()) if ch)
        key = (
            tuple(cl.state_key() for cl in self.clients),
            tuple(nd.state_key() for nd in self.nodes),
            self.dir.state_key(),
            chans,
            tuple(self.script_pos),
            frozenset(self.crashed),
            self.history_key(),
            tuple(self.violations),
            self.steps if self.crash_at else 0,
        )
        return hash(key)

    def invisible_action(self) -> Optional[tuple[str, int]]:
        """A pending delivery that cannot influence anything but its own channel."""
        width, m = self.width, self.m
        for key in self.ready:
            src, dst = divmod(key, width)
            if dst < m:
                if dst in self.crashed or type(self.channels[key][0][0]) is FreeAck:
                    return ("d", key)
            elif dst != self.DIR:
                nd = self.nodes[dst - m]
                if not nd.honest and nd.strategy == "silent":
                    return ("d", key)
        return None


def _digest(value: Optional[bytes]) -> Optional[str]:
    return None if value is None else hashlib.sha256(value).hexdigest()


def run(scenario: Scenario, seed: Optional[int] = None, record_trace: bool = False) -> RunResult:
    """Execute one scenario; deterministic in ``(scenario, seed)``."""
    return Simulation(scenario, seed, record_trace).run()


# exhaustive exploration -----------------------------------------------------------

@dataclass
class ExploreResult:
    states: int = 0
    leaves: int = 0
    branch_points: int = 0
    failures: list = field(default_factory=list)


def explore(scenario: Scenario, depth: Optional[int] = None, check=None, max_states: int = 5_000_000) -> ExploreResult:
    """Depth-first search over interleavings with state deduplication.

    ``depth`` bounds the number of choice points (states with more than one
    enabled action) branched on along any path; past it the run is finished in
    the canonical action order. ``None`` means unbounded. ``check`` is called
    with every terminal :class:`Simulation` and returns a list of problems.
    """
    if depth is None:
        depth = scenario.schedule.depth if scenario.schedule.policy == "exhaustive" else 1 << 30
    out = ExploreResult()
    best: dict[int, int] = {}
    stack = [(Simulation(scenario), depth)]
    while stack:
        sim, budget = stack.pop()
        try:
            while True:
                a = sim.invisible_action()
                if a is None:
                    break
                sim.apply(a)
            acts = sim.enabled_actions()
            key = sim.state_key()
            if best.get(key, -1) >= budget:
                continue
            best[key] = budget
            out.states += 1
            if out.states > max_states:
                raise RuntimeError(f"exploration exceeded {max_states} states")
            if not acts:
                out.leaves += 1
                problems = list(sim.violations)
                problems += sim.starved()
                if check is not None:
                    problems += check(sim)
                if problems:
                    out.failures.append((sim.history_key(), problems))
                continue
            if len(acts) == 1 or budget == 0:
                sim.apply(acts[0])
                stack.append((sim, budget))
                continue
            out.branch_points += 1
            for a in acts:
                child = sim.clone()
                child.apply(a)
                stack.append((child, budget - 1))
        except ProtocolInvariantError as exc:
            out.failures.append((sim.history_key(), [f"invariant: {exc}"]))
    return out

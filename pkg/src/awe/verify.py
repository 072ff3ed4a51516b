"""Linearizability checking and resource probes over recorded executions.

All checks work on a :class:`History`, which can be built either from an
in-memory :class:`~awe.sim.RunResult` or from a JSON-lines trace, so a trace
can be re-checked in a separate process with identical verdicts.
"""

from __future__ import annotations

import bisect
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Sequence

from .core import T0, Timestamp

INF = float("inf")


class MalformedHistory(ValueError):
    pass


@dataclass(frozen=True)
class Op:
    id: int
    client: int
    kind: str  # "write" | "read"
    value: Optional[str]
    """Written value (writes) or returned value (reads), as a digest; None is the initial value."""
    inv: int
    resp: Optional[int] = None
    ts: Optional[Timestamp] = None
    frozen_from: Optional[int] = None

    @property
    def complete(self) -> bool:
        return self.resp is not None


@dataclass
class History:
    ops: list[Op]
    crashed: frozenset = frozenset()
    dir_log: list = field(default_factory=list)
    """(time, client, op id, "scan" | "update") in linearization order."""

    def validate(self) -> None:
        """Reject histories that are not well formed or reuse a write value."""
        by_client: dict[int, list[Op]] = {}
        for op in self.ops:
            if op.kind not in ("write", "read"):
                raise MalformedHistory(f"op {op.id}: unknown kind {op.kind!r}")
            if op.resp is not None and op.resp <= op.inv:
                raise MalformedHistory(f"op {op.id}: response does not follow invocation")
            if op.kind == "write" and op.value is None:
                raise MalformedHistory(f"op {op.id}: write without a value")
            by_client.setdefault(op.client, []).append(op)
        for c, ops in by_client.items():
            ops = sorted(ops, key=lambda o: o.inv)
            for a, b in zip(ops, ops[1:]):
                if a.resp is None or a.resp > b.inv:
                    raise MalformedHistory(f"client {c}: op {b.id} invoked while op {a.id} was pending")
        seen: dict[str, int] = {}
        for op in self.ops:
            if op.kind == "write":
                if op.value in seen:
                    raise MalformedHistory(f"ops {seen[op.value]} and {op.id} write the same value")
                seen[op.value] = op.id


@dataclass
class Verdict:
    linearizable: bool
    witness: Optional[list[int]] = None
    violation: Optional[tuple[Optional[int], Optional[int]]] = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "linearizable": self.linearizable,
            "witness": self.witness,
            "violation": list(self.violation) if self.violation else None,
            "reason": self.reason,
        }


# construction ---------------------------------------------------------------------

def _digest(value: Optional[bytes]) -> Optional[str]:
    return None if value is None else hashlib.sha256(value).hexdigest()


def history_from_result(result) -> History:
    ops = []
    for rec in result.ops:
        value = rec.value if rec.kind == "write" else rec.result
        ops.append(Op(rec.id, rec.client, rec.kind, _digest(value), rec.inv, rec.resp, rec.ts, rec.frozen_from))
    return History(ops, frozenset(result.crashed), list(result.dir_log))


def history_from_trace(events: Sequence[dict]) -> History:
    pending: dict[int, dict] = {}
    ops: dict[int, Op] = {}
    crashed = set()
    dir_log = []
    for t, ev in enumerate(events):
        kind, p = ev["kind"], ev.get("payload", {})
        if kind == "invoke":
            c = int(ev["src"][1:])
            pending[p["op"]] = {"client": c, "kind": p["type"], "value": p.get("value"), "inv": t}
            ops[p["op"]] = Op(p["op"], c, p["type"], p.get("value"), t)
        elif kind == "respond":
            info = pending.pop(p["op"], None)
            if info is None:
                raise MalformedHistory(f"response for unknown op {p['op']}")
            value = info["value"] if info["kind"] == "write" else p.get("value")
            ops[p["op"]] = Op(p["op"], info["client"], info["kind"], value, info["inv"], t,
                              Timestamp(*p["ts"]), p.get("frozen_from"))
        elif kind == "crash":
            crashed.add(int(ev["dst"][1:]))
        elif kind == "dir-atomicity-point":
            c = int(ev["src"][1:])
            dir_log.append((t, c, p["op"], "scan" if p["type"] == "DirScan" else "update"))
    return History([ops[i] for i in sorted(ops)], frozenset(crashed), dir_log)


# linearizability --------------------------------------------------------------------

def check_linearizable(h: History) -> Verdict:
    """Decide linearizability of a register history with unique write values.

    Searches for a linearization directly (depth-first over the operations
    that may go next, memoising on the set already placed and the register
    value). Pending writes are optional and only included when some read
    returned their value; pending reads are dropped. On failure, a pair of
    conflicting operations is extracted for the report.
    """
    h.validate()
    writes = {op.value: op for op in h.ops if op.kind == "write"}
    read_values = {op.value for op in h.ops if op.kind == "read" and op.complete}
    ops = [
        op for op in h.ops
        if op.complete or (op.kind == "write" and op.value in read_values)
    ]
    for op in ops:
        if op.kind == "read" and op.value is not None and op.value not in writes:
            return Verdict(False, violation=(op.id, None), reason=f"read {op.id} returned a value never written")
    if not ops:
        return Verdict(True, witness=[])
    ops.sort(key=lambda o: o.inv)
    N = len(ops)
    invs = [o.inv for o in ops]
    resps = [o.resp if o.resp is not None else INF for o in ops]
    is_write = [o.kind == "write" for o in ops]
    vals = [o.value for o in ops]
    full = (1 << N) - 1

    failed: set[tuple[int, Optional[str]]] = set()
    order: list[int] = []

    def candidates(mask: int) -> list[int]:
        min_resp = INF
        first = -1
        for i in range(N):
            if not mask >> i & 1:
                if first < 0:
                    first = i
                if resps[i] < min_resp:
                    min_resp = resps[i]
        out = []
        for i in range(first, N):
            if invs[i] >= min_resp:
                break
            if not mask >> i & 1:
                out.append(i)
        return out

    # iterative DFS: stack of (mask, value, candidate list, next index)
    stack = [(0, None, candidates(0), 0)]
    found = False
    while stack:
        mask, value, cands, j = stack[-1]
        if mask == full:
            found = True
            break
        advanced = False
        while j < len(cands):
            i = cands[j]
            j += 1
            if is_write[i]:
                nv = vals[i]
            elif vals[i] == value:
                nv = value
            else:
                continue
            nmask = mask | 1 << i
            if (nmask, nv) in failed:
                continue
            stack[-1] = (mask, value, cands, j)
            order.append(i)
            stack.append((nmask, nv, candidates(nmask) if nmask != full else [], 0))
            advanced = True
            break
        if not advanced:
            failed.add((mask, value))
            stack.pop()
            if order:
                order.pop()
    if found:
        return Verdict(True, witness=[ops[i].id for i in order])
    pair, reason = _find_conflict(h)
    return Verdict(False, violation=pair, reason=reason)


def _find_conflict(h: History) -> tuple[tuple[Optional[int], Optional[int]], str]:
    """Name two operations that cannot both be placed consistently."""
    writes = {op.value: op for op in h.ops if op.kind == "write"}
    reads = [op for op in h.ops if op.kind == "read" and op.complete]
    done_writes = [op for op in h.ops if op.kind == "write" and op.complete]
    for r in reads:
        if r.value is None:
            for w in done_writes:
                if w.resp < r.inv:
                    return (w.id, r.id), f"read {r.id} returned the initial value after write {w.id} completed"
            continue
        w = writes[r.value]
        if r.resp < w.inv:
            return (w.id, r.id), f"read {r.id} returned the value of write {w.id} before it was invoked"
        if w.complete:
            for w2 in done_writes:
                if w2 is not w and w.resp < w2.inv and w2.resp < r.inv:
                    return (w2.id, r.id), f"read {r.id} returned a value overwritten by write {w2.id}"
    # clusters of a write with its reads; the initial value is a write at -inf
    clusters: dict[Optional[str], list[Op]] = {}
    for r in reads:
        clusters.setdefault(r.value, []).append(r)
    zones = []
    for v, rs in clusters.items():
        members = list(rs)
        lo_resp = min(o.resp for o in members)
        hi_inv = max(o.inv for o in members)
        head = None
        if v is not None:
            w = writes[v]
            head = w.id
            lo_resp = min(lo_resp, w.resp if w.resp is not None else INF)
            hi_inv = max(hi_inv, w.inv)
        else:
            lo_resp = -INF
        zones.append((lo_resp, hi_inv, head, members))
    for v, w in writes.items():
        if v not in clusters and w.complete:
            zones.append((w.resp, w.inv, w.id, []))
    forward = [z for z in zones if z[0] < z[1]]
    backward = [z for z in zones if z[0] >= z[1]]
    for a in range(len(forward)):
        for b in range(a + 1, len(forward)):
            za, zb = forward[a], forward[b]
            if za[0] < zb[1] and zb[0] < za[1]:
                return _zone_pair(za, zb), "two values must each be current over overlapping intervals"
    for f in forward:
        for z in backward:
            if f[0] < z[1] and z[0] < f[1]:
                return _zone_pair(f, z), "a value is read inside an interval where another must be current"
    return (None, None), "no linearization exists"


def _zone_pair(za, zb) -> tuple[Optional[int], Optional[int]]:
    def rep(z):
        if z[2] is not None:
            return z[2]
        return z[3][0].id if z[3] else None
    return rep(za), rep(zb)


def replay_witness(h: History, witness: Sequence[int]) -> Optional[str]:
    """Check a linearization against the register specification and real time.

    Returns a description of the first problem, or None if the witness holds.
    """
    by_id = {op.id: op for op in h.ops}
    placed = set(witness)
    if len(placed) != len(witness):
        return "witness repeats an operation"
    for op in h.ops:
        if op.complete and op.id not in placed:
            return f"complete op {op.id} missing from witness"
    value = None
    for op_id in witness:
        op = by_id.get(op_id)
        if op is None:
            return f"unknown op {op_id}"
        if op.kind == "write":
            value = op.value
        elif not op.complete:
            return f"pending read {op_id} in witness"
        elif op.value != value:
            return f"read {op_id} returns {op.value} but register holds {value}"
    pos = {op_id: i for i, op_id in enumerate(witness)}
    placed_ops = sorted((by_id[i] for i in witness), key=lambda o: o.inv)
    for a in placed_ops:
        if a.resp is None:
            continue
        for b in placed_ops:
            if a.resp < b.inv and pos[a.id] > pos[b.id]:
                return f"op {a.id} precedes op {b.id} in real time but not in the witness"
    return None


# protocol-level properties ----------------------------------------------------------

def check_wait_free(h: History) -> list[str]:
    return [
        f"{op.kind} {op.id} of correct client {op.client} never completed"
        for op in h.ops if not op.complete and op.client not in h.crashed
    ]


def check_unique_writes(h: History) -> list[str]:
    seen: dict[Timestamp, int] = {}
    out = []
    for op in h.ops:
        if op.kind == "write" and op.complete:
            if op.ts in seen:
                out.append(f"writes {seen[op.ts]} and {op.id} share timestamp {tuple(op.ts)}")
            seen[op.ts] = op.id
    return out


def check_integrity(h: History) -> list[str]:
    """Each non-initial read value belongs to exactly one write with the read's timestamp."""
    by_value: dict[str, list[Op]] = {}
    for op in h.ops:
        if op.kind == "write":
            by_value.setdefault(op.value, []).append(op)
    out = []
    for op in h.ops:
        if op.kind != "read" or not op.complete:
            continue
        if op.value is None:
            if op.ts is not None and op.ts != T0:
                out.append(f"read {op.id} returned the initial value with timestamp {tuple(op.ts)}")
            continue
        ws = by_value.get(op.value, [])
        if len(ws) != 1:
            out.append(f"read {op.id} value matches {len(ws)} writes")
            continue
        w = ws[0]
        if op.ts is not None and w.ts is not None and w.ts != op.ts:
            out.append(f"read {op.id} has timestamp {tuple(op.ts)} but its value was written at {tuple(w.ts)}")
    return out


def check_timestamp_order(h: History) -> list[str]:
    """If one operation precedes another, timestamps do not decrease (strictly for writes)."""
    done = sorted((op for op in h.ops if op.complete and op.ts is not None), key=lambda o: o.resp)
    resp_times = [op.resp for op in done]
    prefix_max: list[tuple[Timestamp, int]] = []
    best: Optional[tuple[Timestamp, int]] = None
    for op in done:
        if best is None or op.ts > best[0]:
            best = (op.ts, op.id)
        prefix_max.append(best)
    out = []
    for op in h.ops:
        if op.ts is None:
            continue
        j = bisect.bisect_left(resp_times, op.inv)
        if j == 0:
            continue
        ts, who = prefix_max[j - 1]
        if ts > op.ts or (op.kind == "write" and ts == op.ts):
            out.append(f"op {who} ({tuple(ts)}) precedes op {op.id} ({tuple(op.ts)})")
    return out


def check_frozen_selection(h: History) -> list[str]:
    """Reads that took a frozen pointer of writer w overlap two writes of w as required.

    The second directory scan of the write that produced the value and the
    update of the next write of w must both fall between the reader's update
    and scan.
    """
    per_op: dict[int, list[tuple[int, str]]] = {}
    for time, c, op_id, kind in h.dir_log:
        per_op.setdefault(op_id, []).append((time, kind))
    writes_by_client: dict[int, list[Op]] = {}
    for op in sorted(h.ops, key=lambda o: o.inv):
        if op.kind == "write":
            writes_by_client.setdefault(op.client, []).append(op)
    out = []
    for op in h.ops:
        if op.kind != "read" or op.frozen_from is None or not op.complete:
            continue
        w = op.frozen_from
        seq = writes_by_client.get(w, [])
        idx = next((i for i, x in enumerate(seq) if x.ts == op.ts), None)
        if idx is None or idx + 1 >= len(seq):
            out.append(f"read {op.id}: frozen {tuple(op.ts)} of client {w} has no following write")
            continue
        r_log = per_op.get(op.id, [])
        w1_log = per_op.get(seq[idx].id, [])
        w2_log = per_op.get(seq[idx + 1].id, [])
        try:
            r_update = next(t for t, k in r_log if k == "update")
            r_scan = next(t for t, k in r_log if k == "scan")
            w1_scan2 = [t for t, k in w1_log if k == "scan"][1]
            w2_update = next(t for t, k in w2_log if k == "update")
        except (StopIteration, IndexError):
            out.append(f"read {op.id}: directory log incomplete for frozen selection")
            continue
        if not (r_update < w1_scan2 < r_scan and r_update < w2_update < r_scan):
            out.append(f"read {op.id}: frozen {tuple(op.ts)} of client {w} not bracketed by its writes")
    return out


# resource probes ---------------------------------------------------------------------

@dataclass
class AmnesicReport:
    max_fragments_per_node: int
    max_total_bytes: int
    bound_bytes: int
    points: int
    excess: list[int]

    @property
    def ok(self) -> bool:
        return not self.excess


def amnesic_bound_bytes(m: int, n: int, fragment_size: int) -> int:
    return 2 * m * m * n * fragment_size


def check_amnesic(points: Iterable, m: int, n: int, fragment_size: int) -> AmnesicReport:
    """Storage at quiescent points against 2 m^2 n fragments of ``fragment_size`` bytes.

    ``points`` holds :class:`~awe.sim.QuiescentPoint` objects or trace payloads
    with ``fragments``/``stored_bytes``; Byzantine nodes (``None``) are ignored.
    """
    bound = amnesic_bound_bytes(m, n, fragment_size)
    max_frag = max_bytes = count = 0
    excess = []
    for p in points:
        frags = p["fragments"] if isinstance(p, dict) else p.fragments
        total = p["stored_bytes"] if isinstance(p, dict) else p.stored_bytes
        step = p.get("step", count) if isinstance(p, dict) else p.step
        count += 1
        max_frag = max([max_frag] + [f for f in frags if f is not None])
        max_bytes = max(max_bytes, total)
        if total > bound:
            excess.append(step)
    return AmnesicReport(max_frag, max_bytes, bound, count, excess)


@dataclass
class BandwidthReport:
    per_op: dict
    """op id -> (kind, data bytes, metadata bytes)"""
    violations: list[str]

    @property
    def ok(self) -> bool:
        return not self.violations


def check_bandwidth(h: History, op_bytes: dict, n: int, t: int, k: int, fragment_size: int) -> BandwidthReport:
    """Data-plane bytes per operation against n*L for writes and (t+k)*L for reads.

    ``op_bytes`` maps op id to ``(sent data, received data, metadata)``.
    Writes count fragment bytes sent; reads count fragment bytes received.
    """
    per_op = {}
    bad = []
    for op in h.ops:
        sent, recv, meta = op_bytes.get(op.id, (0, 0, 0))
        data = sent if op.kind == "write" else recv
        per_op[op.id] = (op.kind, data, meta)
        if not op.complete:
            continue
        if op.kind == "write" and data != n * fragment_size:
            bad.append(f"write {op.id}: {data} data bytes, expected {n * fragment_size}")
        elif op.kind == "read":
            cap = 0 if op.ts in (None, T0) else (t + k) * fragment_size
            if data > cap:
                bad.append(f"read {op.id}: {data} data bytes exceeds {cap}")
    return BandwidthReport(per_op, bad)


def op_bytes_from_trace(events: Sequence[dict]) -> dict:
    out: dict[int, list[int]] = {}
    for ev in events:
        if ev["kind"] != "deliver":
            continue
        p = ev["payload"]
        op = p.get("op", -1)
        if op < 0:
            continue
        b = out.setdefault(op, [0, 0, 0])
        src, dst = ev["src"], ev["dst"]
        if src.startswith("c") and dst.startswith("d"):
            b[0] += p.get("data_bytes", 0)
        elif src.startswith("d") and dst.startswith("c"):
            b[1] += p.get("data_bytes", 0)
        b[2] += p.get("meta_bytes", 0)
    for ev in events:
        if ev["kind"] == "dir-atomicity-point":
            p = ev["payload"]
            if p.get("op", -1) >= 0:
                out.setdefault(p["op"], [0, 0, 0])[2] += p.get("meta_bytes", 0)
    return {k: tuple(v) for k, v in out.items()}


def check_fifo(events: Sequence[dict]) -> list[str]:
    expect: dict[tuple[str, str], int] = {}
    out = []
    for ev in events:
        if ev["kind"] not in ("deliver", "dir-atomicity-point"):
            continue
        ch = (ev["src"], ev["dst"])
        seq = ev["payload"].get("seq")
        want = expect.get(ch, 0)
        if seq != want:
            out.append(f"channel {ch[0]}->{ch[1]}: delivered #{seq}, expected #{want}")
        expect[ch] = (seq if seq is not None else want) + 1
    return out


# trace files ---------------------------------------------------------------------------

def write_trace(path, events: Sequence[dict]) -> None:
    with open(path, "w") as fh:
        for ev in events:
            fh.write(json.dumps(ev, separators=(",", ":"), sort_keys=True))
            fh.write("\n")


def read_trace(path) -> list[dict]:
    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                ev = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedHistory(f"line {lineno}: {exc}") from None
            for f in ("step", "kind", "src", "dst", "payload"):
                if f not in ev:
                    raise MalformedHistory(f"line {lineno}: missing field {f!r}")
            out.append(ev)
    return out


# combined report ------------------------------------------------------------------------

def check_history(h: History) -> dict[str, list[str]]:
    """Every history-level property, keyed by name; empty lists mean it holds."""
    verdict = check_linearizable(h)
    lin = [] if verdict.linearizable else [f"{verdict.reason} (ops {verdict.violation})"]
    return {
        "linearizable": lin,
        "wait_free": check_wait_free(h),
        "unique_writes": check_unique_writes(h),
        "integrity": check_integrity(h),
        "timestamp_order": check_timestamp_order(h),
        "frozen_selection": check_frozen_selection(h),
    }


def verify_result(result) -> dict[str, Any]:
    """All verdicts for an in-memory run."""
    cfg = result.scenario.config
    h = history_from_result(result)
    report: dict[str, Any] = check_history(h)
    report["monitors"] = list(result.violations)
    report["liveness"] = list(result.starved)
    am = check_amnesic(result.quiescent, cfg.m, cfg.n, cfg.fragment_size)
    report["amnesic"] = [f"storage above bound at steps {am.excess}"] if am.excess else []
    bw = check_bandwidth(h, result.op_bytes, cfg.n, cfg.t, cfg.k, cfg.fragment_size)
    report["bandwidth"] = bw.violations
    report["_amnesic"] = am
    report["_bandwidth"] = bw
    return report


def verify_trace(events: Sequence[dict]) -> dict[str, Any]:
    """All verdicts for a stored trace (the first event must carry the config)."""
    report: dict[str, Any] = {"fifo": check_fifo(events)}
    h = history_from_trace(events)
    report.update(check_history(h))
    cfg = next((ev["payload"] for ev in events if ev["kind"] == "config"), None)
    if cfg is not None:
        n, t, k, m, ell = (cfg[f] for f in ("n", "t", "k", "m", "ell"))
        L = -(-ell // k)
        points = [dict(ev["payload"], step=ev["step"]) for ev in events if ev["kind"] == "quiescent"]
        am = check_amnesic(points, m, n, L)
        report["amnesic"] = [f"storage above bound at steps {am.excess}"] if am.excess else []
        bw = check_bandwidth(h, op_bytes_from_trace(events), n, t, k, L)
        report["bandwidth"] = bw.violations
        report["_amnesic"] = am
        report["_bandwidth"] = bw
    report["monitors"] = [ev["payload"]["message"] for ev in events if ev["kind"] == "violation"]
    report["liveness"] = [ev["payload"]["message"] for ev in events if ev["kind"] == "starved"]
    return report


def failed_checks(report: dict[str, Any]) -> dict[str, list[str]]:
    return {k: v for k, v in report.items() if not k.startswith("_") and v}

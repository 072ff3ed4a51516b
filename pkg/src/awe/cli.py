"""Command-line front end: ``awe run`` executes scenarios, ``awe check`` re-verifies traces."""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from .sim import Scenario, ScenarioError, explore, load_scenario, run
from .verify import (
    MalformedHistory,
    failed_checks,
    read_trace,
    verify_result,
    verify_trace,
    write_trace,
)

VERDICTS = ("linearizable", "wait_free", "amnesic", "bandwidth")


@dataclass
class RunReport:
    scenario: str
    seed: int
    writes: int
    reads: int
    completed: int
    linearizable: bool
    wait_free: bool
    amnesic: bool
    bandwidth: bool
    max_fragments_per_node: int
    runtime_s: float
    failures: dict

    @property
    def ok(self) -> bool:
        return not self.failures


def _report(scenario: Scenario, result, report: dict, runtime: float) -> RunReport:
    failed = failed_checks(report)
    ops = result.ops
    return RunReport(
        scenario=scenario.digest(),
        seed=result.seed,
        writes=sum(op.kind == "write" for op in ops),
        reads=sum(op.kind == "read" for op in ops),
        completed=sum(op.resp is not None for op in ops),
        linearizable="linearizable" not in failed,
        wait_free=not ("wait_free" in failed or "liveness" in failed),
        amnesic="amnesic" not in failed,
        bandwidth="bandwidth" not in failed,
        max_fragments_per_node=report["_amnesic"].max_fragments_per_node,
        runtime_s=round(runtime, 4),
        failures=failed,
    )


def _table(rows: Sequence[RunReport]) -> str:
    head = ("seed", "ops", "done", "lin", "wait-free", "amnesic", "bandwidth", "max frags", "time s")
    body = [
        (str(r.seed), str(r.writes + r.reads), str(r.completed),
         *("ok" if getattr(r, v) else "FAIL" for v in VERDICTS),
         str(r.max_fragments_per_node), f"{r.runtime_s:.3f}")
        for r in rows
    ]
    widths = [max(len(x) for x in col) for col in zip(head, *body)]
    fmt = "  ".join(f"{{:>{w}}}" for w in widths)
    return "\n".join([fmt.format(*head)] + [fmt.format(*b) for b in body])


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        for e in exc.errors:
            print(f"scenario error: {e}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return 2
    if args.fairness_bound is not None:
        scenario = replace(scenario, schedule=replace(scenario.schedule, fairness=args.fairness_bound))
    out = Path(args.out) if args.out else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    if args.exhaustive or scenario.schedule.policy == "exhaustive":
        return _run_exhaustive(scenario, args, out)

    base = args.seed if args.seed is not None else scenario.schedule.seed
    rows = []
    for seed in range(base, base + args.runs):
        t0 = time.perf_counter()
        result = run(scenario.with_seed(seed), seed, record_trace=out is not None)
        report = verify_result(result)
        rows.append(_report(scenario, result, report, time.perf_counter() - t0))
        if out is not None:
            write_trace(out / f"trace-{seed}.jsonl", result.trace)
    print(_table(rows))
    failed = [r for r in rows if not r.ok]
    for r in failed:
        for name, msgs in r.failures.items():
            for msg in msgs[:5]:
                print(f"seed {r.seed}: {name}: {msg}")
    summary = {
        "scenario": scenario.to_dict(),
        "scenario_digest": scenario.digest(),
        "runs": [asdict(r) for r in rows],
        "passed": not failed,
    }
    if out is not None:
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    print(f"{len(rows) - len(failed)}/{len(rows)} runs passed")
    return 1 if failed else 0


def _run_exhaustive(scenario: Scenario, args: argparse.Namespace, out: Optional[Path]) -> int:
    def check(sim):
        report = verify_result(sim.result())
        return [f"{k}: {v}" for k, v in failed_checks(report).items()]

    depth = args.depth if args.depth is not None else scenario.schedule.depth
    t0 = time.perf_counter()
    res = explore(scenario, depth, check=check)
    elapsed = time.perf_counter() - t0
    summary = {
        "scenario": scenario.to_dict(),
        "scenario_digest": scenario.digest(),
        "depth": depth,
        "states": res.states,
        "terminal_states": res.leaves,
        "branch_points": res.branch_points,
        "failures": [problems for _, problems in res.failures],
        "runtime_s": round(elapsed, 3),
        "passed": not res.failures,
    }
    print(f"explored {res.states} states, {res.leaves} terminal, depth {depth}: "
          f"{len(res.failures)} failing in {elapsed:.1f}s")
    for _, problems in res.failures[:5]:
        print("  " + "; ".join(problems))
    if out is not None:
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return 1 if res.failures else 0


def cmd_check(args: argparse.Namespace) -> int:
    try:
        events = read_trace(args.trace)
        report = verify_trace(events)
    except (OSError, MalformedHistory) as exc:
        print(f"cannot check trace: {exc}", file=sys.stderr)
        return 2
    failed = failed_checks(report)
    doc = {
        "trace": str(args.trace),
        "events": len(events),
        "passed": not failed,
        "checks": {k: not v for k, v in report.items() if not k.startswith("_")},
        "failures": failed,
    }
    for name, ok in sorted(doc["checks"].items()):
        print(f"{name:18s} {'ok' if ok else 'FAIL'}")
    for name, msgs in failed.items():
        for msg in msgs[:5]:
            print(f"  {name}: {msg}")
    if args.json:
        Path(args.json).write_text(json.dumps(doc, indent=2, sort_keys=True))
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="awe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="execute a scenario and verify every run")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--seed", type=int, default=None, help="first seed (default: scenario seed)")
    p.add_argument("--runs", type=int, default=1, help="number of consecutive seeds")
    p.add_argument("--out", default=None, help="directory for traces and summary.json")
    p.add_argument("--exhaustive", action="store_true", help="enumerate interleavings instead of sampling")
    p.add_argument("--depth", type=int, default=None, help="choice points branched on in exhaustive mode")
    p.add_argument("--fairness-bound", type=int, default=None, help="max steps a pending event may wait")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="verify a stored JSON-lines trace")
    p.add_argument("trace", help="trace file written by 'awe run --out'")
    p.add_argument("--json", default=None, help="write the verdict document here")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

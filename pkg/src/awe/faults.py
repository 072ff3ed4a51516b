"""Byzantine data-node behaviours and the adversary description."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .core import Timestamp
from .messages import FreeAck, NodeFree, NodeRead, NodeWrite, ReadResp, WriteAck
from .node import DataNode

STRATEGIES = (
    "silent",
    "corrupt-fragment",
    "wrong-timestamp",
    "ack-without-store",
    "spurious-free",
    "stale-replay",
)

_MASK64 = (1 << 64) - 1


def mix64(*parts: int) -> int:
    """splitmix64 over the given integers; stateless per-event randomness."""
    z = 0x9E3779B97F4A7C15
    for p in parts:
        z = (z ^ (p & _MASK64)) & _MASK64
        z = (z + 0x9E3779B97F4A7C15) & _MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        z ^= z >> 31
    return z


@dataclass(frozen=True)
class AdversarySpec:
    byzantine_nodes: Mapping[int, str] = field(default_factory=dict)
    client_crashes: Mapping[int, int] = field(default_factory=dict)
    seed: int = 0

    def field_errors(self, n: int, t: int, m: int) -> list[str]:
        errs = []
        if len(self.byzantine_nodes) > t:
            errs.append(f"adversary.nodes: {len(self.byzantine_nodes)} Byzantine nodes exceed t={t}")
        for i, s in self.byzantine_nodes.items():
            if not 0 <= i < n:
                errs.append(f"adversary.nodes: node id {i} out of range [0, {n})")
            if s not in STRATEGIES:
                errs.append(f"adversary.nodes: unknown strategy {s!r} for node {i}")
        for c, step in self.client_crashes.items():
            if not 0 <= c < m:
                errs.append(f"adversary.client_crashes: client id {c} out of range [0, {m})")
            if step < 0:
                errs.append(f"adversary.client_crashes: step for client {c} must be >= 0")
        return errs


def _flip(frag: bytes) -> bytes:
    return bytes([frag[0] ^ 0xFF]) + frag[1:] if frag else b"\xff"


class ByzantineNode(DataNode):
    """A data node that follows one fixed misbehaviour.

    Random choices are a pure function of (seed, node index, event count), so
    a run is reproducible and the node's state is just its store plus a
    counter.
    """

    honest = False

    def __init__(self, index: int, strategy: str, seed: int = 0) -> None:
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown Byzantine strategy {strategy!r}")
        super().__init__(index)
        self.strategy = strategy
        self.seed = seed
        self.events = 0
        # stale-replay keeps everything it ever saw
        self.history: list[tuple[Timestamp, bytes]] = []

    def _coin(self) -> int:
        return mix64(self.seed, self.index, self.events)

    def handle(self, msg) -> list:
        self.events += 1
        s = self.strategy
        if s == "silent":
            return []
        kind = type(msg)
        if s == "corrupt-fragment":
            if kind is NodeRead:
                ts, frag = self.store.read(msg.ts)
                return [ReadResp(ts, None if frag is None else _flip(frag))]
            return super().handle(msg)
        if s == "wrong-timestamp":
            out = super().handle(msg)
            bump = 1 + self._coin() % 3
            if kind is NodeWrite:
                return [WriteAck(Timestamp(msg.ts.sn + bump, msg.ts.c))]
            if kind is NodeRead:
                return [ReadResp(Timestamp(msg.ts.sn + bump, msg.ts.c), out[0].frag)]
            return out
        if s == "ack-without-store":
            if kind is NodeWrite:
                return [WriteAck(msg.ts)]
            if kind is NodeRead:
                return [ReadResp(msg.ts, None)]
            return [FreeAck(msg.tss)]
        if s == "spurious-free":
            out = super().handle(msg)
            if self.store.data and self._coin() % 2 == 0:
                self.store.data.clear()
            return out
        if s == "stale-replay":
            if kind is NodeWrite:
                self.history.append((msg.ts, msg.frag))
                return super().handle(msg)
            if kind is NodeFree:
                return [FreeAck(msg.tss)]
            if kind is NodeRead:
                older = [(ts, f) for ts, f in self.history if ts < msg.ts]
                if not older:
                    return [ReadResp(msg.ts, None)]
                ts, frag = older[self._coin() % len(older)]
                # alternate between an honest-looking label and the old one
                return [ReadResp(msg.ts if self._coin() & 1 else ts, frag)]
        return super().handle(msg)

    def state_key(self) -> tuple:
        return (self.store.state_key(), self.events, tuple(self.history))


def make_node(index: int, adversary: AdversarySpec) -> DataNode:
    strategy = adversary.byzantine_nodes.get(index)
    if strategy is None:
        return DataNode(index)
    return ByzantineNode(index, strategy, adversary.seed)

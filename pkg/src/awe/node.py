"""Honest data node: a timestamp-keyed fragment store."""

from __future__ import annotations

from typing import Iterable, Optional

from .core import Timestamp
from .messages import FreeAck, NodeFree, NodeRead, NodeWrite, ReadResp, WriteAck


class NodeStore:
    """Plain key-value store; keys are canonical timestamp encodings."""

    def __init__(self) -> None:
        self.data: dict[bytes, bytes] = {}

    def write(self, ts: Timestamp, frag: bytes) -> Timestamp:
        if frag is None:
            raise ValueError("cannot store an absent fragment")
        self.data[ts.encode()] = frag
        return ts

    def read(self, ts: Timestamp) -> tuple[Timestamp, Optional[bytes]]:
        return ts, self.data.get(ts.encode())

    def free(self, tss: Iterable[Timestamp]) -> frozenset:
        tss = frozenset(tss)
        for ts in tss:
            self.data.pop(ts.encode(), None)
        return tss

    def timestamps(self) -> list[Timestamp]:
        return sorted(Timestamp.decode(k) for k in self.data)

    def __contains__(self, ts: Timestamp) -> bool:
        return ts.encode() in self.data

    def __len__(self) -> int:
        return len(self.data)

    @property
    def stored_bytes(self) -> int:
        return sum(len(v) for v in self.data.values())

    def state_key(self) -> tuple:
        return tuple(sorted(self.data.items()))


class DataNode:
    """Event handler around a :class:`NodeStore`; replies go back to the sender."""

    honest = True

    def __init__(self, index: int) -> None:
        self.index = index
        self.store = NodeStore()

    def handle(self, msg) -> list:
        kind = type(msg)
        if kind is NodeWrite:
            return [WriteAck(self.store.write(msg.ts, msg.frag))]
        if kind is NodeRead:
            return [ReadResp(*self.store.read(msg.ts))]
        if kind is NodeFree:
            # nobody waits for this ack, it only completes the trace
            return [FreeAck(self.store.free(msg.tss))]
        raise TypeError(f"data node cannot handle {kind.__name__}")

    def state_key(self) -> tuple:
        return self.store.state_key()

"""Wire messages exchanged between clients, data nodes and the directory."""

from __future__ import annotations

from typing import NamedTuple, Optional

from .core import EntryUpdate, Timestamp, pointer_to_json, update_to_json


class DirScan(NamedTuple):
    pass


class DirUpdate(NamedTuple):
    c: int
    fields: EntryUpdate


class ScanResp(NamedTuple):
    M: tuple


class UpdateAck(NamedTuple):
    pass


class NodeWrite(NamedTuple):
    ts: Timestamp
    frag: bytes


class WriteAck(NamedTuple):
    ts: Timestamp


class NodeRead(NamedTuple):
    ts: Timestamp


class ReadResp(NamedTuple):
    ts: Timestamp
    frag: Optional[bytes]


class NodeFree(NamedTuple):
    tss: frozenset


class FreeAck(NamedTuple):
    tss: frozenset


TS_BYTES = 10
DIGEST_BYTES = 32


def _pointer_bytes(p) -> int:
    return TS_BYTES + len(p.set) + DIGEST_BYTES * sum(h is not None for h in p.hash)


def data_bytes(msg) -> int:
    """Fragment payload bytes carried by ``msg`` (the data plane)."""
    if type(msg) is NodeWrite:
        return len(msg.frag)
    if type(msg) is ReadResp and msg.frag is not None:
        return len(msg.frag)
    return 0


def metadata_bytes(msg) -> int:
    """Rough encoded size of everything in ``msg`` that is not fragment data."""
    kind = type(msg)
    if kind in (NodeWrite, WriteAck, NodeRead, ReadResp):
        return TS_BYTES
    if kind in (NodeFree, FreeAck):
        return TS_BYTES * len(msg.tss)
    if kind is DirUpdate:
        total = 2
        for f, v in msg.fields.items():
            if f == "writeptr":
                total += _pointer_bytes(v)
            elif f == "frozenptrlist":
                total += sum(_pointer_bytes(p) for p in v)
            elif f == "frozenindex":
                total += 8 * len(v)
            else:
                total += 8
        return total
    if kind is ScanResp:
        return sum(
            _pointer_bytes(e.writeptr) + sum(_pointer_bytes(p) for p in e.frozenptrlist)
            + 8 * len(e.frozenindex) + 8
            for e in msg.M
        )
    return 0


def message_to_json(msg) -> dict:
    kind = type(msg).__name__
    out: dict = {"type": kind}
    if hasattr(msg, "ts"):
        out["ts"] = msg.ts.to_json()
    if hasattr(msg, "tss"):
        out["tss"] = sorted(ts.to_json() for ts in msg.tss)
    if kind == "NodeWrite":
        out["frag_len"] = len(msg.frag)
    elif kind == "ReadResp":
        out["frag_len"] = None if msg.frag is None else len(msg.frag)
    elif kind == "DirUpdate":
        out["c"] = msg.c
        out["fields"] = update_to_json(msg.fields)
    elif kind == "ScanResp":
        out["writeptrs"] = [pointer_to_json(e.writeptr)["ts"] for e in msg.M]
    out["data_bytes"] = data_bytes(msg)
    out["meta_bytes"] = metadata_bytes(msg)
    return out

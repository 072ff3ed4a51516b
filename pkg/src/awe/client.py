"""Writer and reader state machines of the register protocol.

A :class:`Client` is driven entirely by its ``write``/``read`` invocations and
by ``deliver`` calls for incoming messages. It talks to the outside world
through a small ``net`` object (see :class:`Network`), which the simulator
implements.
"""

from __future__ import annotations

import enum
from typing import Optional, Protocol, Sequence

from .core import (
    T0,
    EntryUpdate,
    MetadataEntry,
    Pointer,
    ProtocolInvariantError,
    SystemConfig,
    Timestamp,
    build_cross_checksum,
    hash_fragment,
    null_pointer,
)
from .erasure import CodecParams, encode, reconstruct
from .messages import (
    DirScan,
    DirUpdate,
    FreeAck,
    NodeFree,
    NodeRead,
    NodeWrite,
    ReadResp,
    ScanResp,
    UpdateAck,
    WriteAck,
)

DIR = -1
"""Source/destination id of the metadata directory as seen by a client."""


class Phase(enum.Enum):
    IDLE = "idle"
    # writer
    SCANNING = "scanning"
    DISPERSING = "dispersing"
    UPDATING = "updating"
    COLLECTING = "collecting-indices"
    FREEING = "freeing"
    # reader
    ANNOUNCING = "announcing"
    READ_SCANNING = "read-scanning"
    FETCHING = "fetching"


class Network(Protocol):
    def send(self, src: int, dst: int, msg) -> None: ...

    def respond(self, c: int, result: Optional[bytes], ts: Timestamp) -> None: ...

    def readptr_fixed(self, c: int, ptr: Pointer, writer: int, frozen: bool) -> None: ...


def readfrom(M: Sequence[MetadataEntry], c: int, p: int, index: int) -> Pointer:
    entry = M[p]
    if index > entry.frozenindex[c]:
        return entry.writeptr
    return entry.frozenptrlist[c]


def highestread_source(M: Sequence[MetadataEntry], c: int, index: int) -> tuple[Pointer, int, bool]:
    """Like :func:`highestread`, also naming the entry and whether it was frozen.

    The writer id is ``-1`` when every candidate is the null pointer.
    """
    best = readfrom(M, c, 0, index)
    who, frozen = 0, index <= M[0].frozenindex[c]
    for p in range(1, len(M)):
        ptr = readfrom(M, c, p, index)
        if ptr.ts > best.ts:
            best, who, frozen = ptr, p, index <= M[p].frozenindex[c]
    if best.ts == T0:
        return best, -1, False
    return best, who, frozen


def highestread(M: Sequence[MetadataEntry], c: int, index: int) -> Pointer:
    return highestread_source(M, c, index)[0]


class Client:
    """One client; it may both write and read, one operation at a time."""

    def __init__(self, c: int, config: SystemConfig, codec: CodecParams, net: Network) -> None:
        self.c = c
        self.cfg = config
        self.codec = codec
        self.net = net
        n, m = config.n, config.m
        nul = null_pointer(n)
        self.nullptr = nul
        # kept across operations
        self.writeptr = nul
        self.frozenptrlist = [nul] * m
        self.reservedptrlist = [nul] * m
        self.frozenindex = [0] * m
        self.readindex = 0
        # per operation
        self.prevptr = nul
        self.readptr = nul
        self.readlist: list[Optional[bytes]] = [None] * n
        self.nread = 0
        self.ackset: set[int] = set()
        self.hashes: tuple = nul.hash
        self.pending_value: Optional[bytes] = None
        self.phase = Phase.IDLE

    # invocations ---------------------------------------------------------

    def write(self, v: bytes) -> None:
        if self.phase is not Phase.IDLE:
            raise RuntimeError(f"client {self.c} already has an operation in progress")
        self.prevptr = self.writeptr
        self.pending_value = v
        self.phase = Phase.SCANNING
        self.net.send(self.c, DIR, DirScan())

    def read(self) -> None:
        if self.phase is not Phase.IDLE:
            raise RuntimeError(f"client {self.c} already has an operation in progress")
        self.readlist = [None] * self.cfg.n
        self.nread = 0
        self.readindex += 1
        self.phase = Phase.ANNOUNCING
        self.net.send(self.c, DIR, DirUpdate(self.c, EntryUpdate(readindex=self.readindex)))

    # message handling ----------------------------------------------------

    def deliver(self, src: int, msg) -> None:
        kind = type(msg)
        if kind is WriteAck:
            self._on_write_ack(src, msg.ts)
        elif kind is ReadResp:
            self._on_read_resp(src, msg.ts, msg.frag)
        elif kind is ScanResp:
            if self.phase is Phase.SCANNING:
                self._disperse(msg.M)
            elif self.phase is Phase.COLLECTING:
                self._collect_and_free(msg.M)
            elif self.phase is Phase.READ_SCANNING:
                self._start_fetch(msg.M)
            else:
                raise ProtocolInvariantError(f"client {self.c}: unexpected scan response in {self.phase}")
        elif kind is UpdateAck:
            if self.phase is Phase.UPDATING:
                self.phase = Phase.COLLECTING
            elif self.phase is Phase.ANNOUNCING:
                self.phase = Phase.READ_SCANNING
            else:
                raise ProtocolInvariantError(f"client {self.c}: unexpected update ack in {self.phase}")
            self.net.send(self.c, DIR, DirScan())
        elif kind is FreeAck:
            pass
        else:
            raise TypeError(f"client cannot handle {kind.__name__}")

    # writer --------------------------------------------------------------

    def _disperse(self, M: Sequence[MetadataEntry]) -> None:
        wsn = max(e.writeptr.ts for e in M).sn
        ts = Timestamp(wsn + 1, self.c)
        frags = encode(self.pending_value, self.codec)
        self.hashes = build_cross_checksum(frags)
        self.ackset = set()
        self.writeptr = Pointer(ts, frozenset(), self.hashes)
        self.phase = Phase.DISPERSING
        for i, f in enumerate(frags):
            self.net.send(self.c, i, NodeWrite(ts, f))

    def _on_write_ack(self, i: int, ats: Timestamp) -> None:
        q = self.cfg.quorum
        if ats != self.writeptr.ts or len(self.ackset) >= q:
            return
        self.ackset.add(i)
        if len(self.ackset) == q:
            self.writeptr = Pointer(ats, frozenset(self.ackset), self.hashes)
            self.phase = Phase.UPDATING
            fields = EntryUpdate(
                writeptr=self.writeptr,
                frozenptrlist=tuple(self.frozenptrlist),
                frozenindex=tuple(self.frozenindex),
            )
            self.net.send(self.c, DIR, DirUpdate(self.c, fields))

    def _collect_and_free(self, M: Sequence[MetadataEntry]) -> None:
        self.phase = Phase.FREEING
        freets = {self.prevptr.ts}
        for p in range(self.cfg.m):
            if p == self.c:
                continue
            index = M[p].readindex
            if index > self.frozenindex[p]:
                # p may be reading prevptr or writeptr right now
                freets.add(self.frozenptrlist[p].ts)
                freets.add(self.reservedptrlist[p].ts)
                self.frozenptrlist[p] = self.writeptr
                self.frozenindex[p] = index
                self.reservedptrlist[p] = self.prevptr
        retained = {p.ts for p in self.frozenptrlist} | {p.ts for p in self.reservedptrlist}
        freets -= retained
        if self.writeptr.ts in freets:
            raise ProtocolInvariantError(f"client {self.c}: about to free its written value")
        tss = frozenset(freets)
        for j in range(self.cfg.n):
            self.net.send(self.c, j, NodeFree(tss))
        self.phase = Phase.IDLE
        self.pending_value = None
        self.net.respond(self.c, None, self.writeptr.ts)

    # reader --------------------------------------------------------------

    def _start_fetch(self, M: Sequence[MetadataEntry]) -> None:
        ptr, who, frozen = highestread_source(M, self.c, self.readindex)
        self.readptr = ptr
        self.net.readptr_fixed(self.c, ptr, who, frozen)
        if ptr.ts == T0:
            self.phase = Phase.IDLE
            self.net.respond(self.c, None, T0)
            return
        self.phase = Phase.FETCHING
        for i in sorted(ptr.set):
            self.net.send(self.c, i, NodeRead(ptr.ts))

    def _on_read_resp(self, i: int, vts: Timestamp, v: Optional[bytes]) -> None:
        if vts != self.readptr.ts or self.readlist[i] is not None:
            return
        if v is None or hash_fragment(v) != self.readptr.hash[i]:
            return
        self.readlist[i] = v
        self.nread += 1
        if self.nread == self.cfg.k:
            ts = self.readptr.ts
            self.readptr = self.nullptr
            value = reconstruct(self.readlist, self.codec, self.cfg.ell)
            self.phase = Phase.IDLE
            self.net.respond(self.c, value, ts)

    # exploration support -------------------------------------------------

    def state_key(self) -> tuple:
        return (
            self.phase,
            self.writeptr,
            tuple(self.frozenptrlist),
            tuple(self.reservedptrlist),
            tuple(self.frozenindex),
            self.readindex,
            self.prevptr,
            self.readptr,
            tuple(self.readlist),
            tuple(sorted(self.ackset)),
            self.pending_value,
        )

"""The metadata directory: an atomic snapshot object with one entry per client."""

from __future__ import annotations

from typing import Protocol

from .core import (
    EntryUpdate,
    MetadataEntry,
    ProtocolInvariantError,
    initial_entry,
)


class Directory(Protocol):
    """What the client protocol needs from ``dir``.

    The in-memory :class:`SnapshotDirectory` is trusted; a replicated
    implementation only has to keep these two operations linearizable.
    """

    def update(self, c: int, fields: EntryUpdate) -> None: ...

    def scan(self) -> tuple[MetadataEntry, ...]: ...


class SnapshotDirectory:
    """Single trusted snapshot object.

    Each call takes effect instantly; the simulator decides when that instant
    happens. With ``check_invariants`` every update is checked for the
    frozen-below-written and monotonicity properties of the protocol.
    """

    def __init__(self, m: int, n: int, check_invariants: bool = True) -> None:
        self.m = m
        self.n = n
        self.check_invariants = check_invariants
        self.entries: tuple[MetadataEntry, ...] = (initial_entry(m, n),) * m

    def update(self, c: int, fields: EntryUpdate) -> None:
        if not 0 <= c < self.m:
            raise IndexError(f"client id {c} out of range [0, {self.m})")
        old = self.entries[c]
        new = fields.apply(old)
        if new is old:
            return
        if self.check_invariants:
            self._check(c, old, new)
        entries = list(self.entries)
        entries[c] = new
        self.entries = tuple(entries)

    def scan(self) -> tuple[MetadataEntry, ...]:
        return self.entries

    def _check(self, c: int, old: MetadataEntry, new: MetadataEntry) -> None:
        if new.writeptr.ts < old.writeptr.ts:
            raise ProtocolInvariantError(f"client {c}: written timestamp decreased")
        for p in range(self.m):
            if new.frozenptrlist[p].ts < old.frozenptrlist[p].ts:
                raise ProtocolInvariantError(f"client {c}: frozen timestamp for {p} decreased")
        if new.writeptr.ts.sn > 0:
            for p, fp in enumerate(new.frozenptrlist):
                if not new.writeptr.ts > fp.ts:
                    raise ProtocolInvariantError(
                        f"client {c}: frozen {fp.ts} for {p} not below written {new.writeptr.ts}"
                    )
        for p, idx in enumerate(new.frozenindex):
            published = new.readindex if p == c else self.entries[p].readindex
            if idx > published:
                raise ProtocolInvariantError(
                    f"client {c}: frozenindex[{p}]={idx} ahead of published readindex {published}"
                )

    def state_key(self) -> tuple:
        return self.entries

"""Protocol value types: timestamps, pointers, metadata entries, system config.

Everything here is immutable so snapshots can be shared freely between the
directory, the clients and the trace recorder.
"""

from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass
from functools import lru_cache
from typing import Any, Iterable, Mapping, NamedTuple, Optional, Sequence

NIL = -1
"""Client id of the initial timestamp; orders below every real client id."""

DIGEST_BITS = 256

Fragment = Optional[bytes]
"""A coded fragment, or ``None`` for an absent one."""


class ProtocolInvariantError(AssertionError):
    """An online monitor observed a state the protocol must never reach."""


class Ordering(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


class Timestamp(NamedTuple):
    sn: int
    c: int

    def encode(self) -> bytes:
        """8-byte big-endian sequence number followed by a 2-byte client id."""
        return struct.pack(">QH", self.sn, 0xFFFF if self.c == NIL else self.c)

    @classmethod
    def decode(cls, raw: bytes) -> "Timestamp":
        sn, c = struct.unpack(">QH", raw)
        return cls(sn, NIL if c == 0xFFFF else c)

    def to_json(self) -> list[int]:
        return [self.sn, self.c]


T0 = Timestamp(0, NIL)


def compare_timestamps(a: Timestamp, b: Timestamp) -> Ordering:
    if a.sn != b.sn:
        return Ordering.GREATER if a.sn > b.sn else Ordering.LESS
    if a.c != b.c:
        return Ordering.GREATER if a.c > b.c else Ordering.LESS
    return Ordering.EQUAL


class Pointer(NamedTuple):
    """Metadata for one stored value: timestamp, acking nodes, cross checksum."""

    ts: Timestamp
    set: frozenset
    hash: tuple


@lru_cache(maxsize=None)
def null_pointer(n: int) -> Pointer:
    return Pointer(T0, frozenset(), (None,) * n)


class MetadataEntry(NamedTuple):
    writeptr: Pointer
    frozenptrlist: tuple
    frozenindex: tuple
    readindex: int


ENTRY_FIELDS = MetadataEntry._fields


@lru_cache(maxsize=None)
def initial_entry(m: int, n: int) -> MetadataEntry:
    nul = null_pointer(n)
    return MetadataEntry(nul, (nul,) * m, (0,) * m, 0)


class EntryUpdate:
    """A partial :class:`MetadataEntry`; fields not given are wildcards.

    Presence is tracked by key membership, never by a sentinel value, because
    the null pointer and zero indices are legitimate field values.
    """

    __slots__ = ("_fields",)

    def __init__(self, **fields: Any) -> None:
        unknown = set(fields) - set(ENTRY_FIELDS)
        if unknown:
            raise ValueError(f"unknown metadata fields: {sorted(unknown)}")
        self._fields = tuple((f, fields[f]) for f in ENTRY_FIELDS if f in fields)

    @property
    def present(self) -> tuple[str, ...]:
        return tuple(f for f, _ in self._fields)

    def items(self) -> tuple[tuple[str, Any], ...]:
        return self._fields

    def apply(self, entry: MetadataEntry) -> MetadataEntry:
        if not self._fields:
            return entry
        return entry._replace(**dict(self._fields))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, EntryUpdate) and self._fields == other._fields

    def __hash__(self) -> int:
        return hash(self._fields)

    def __repr__(self) -> str:
        inner = ", ".join(f"{f}={v!r}" for f, v in self._fields)
        return f"EntryUpdate({inner})"


def hash_fragment(f: Fragment) -> bytes:
    if f is None:
        raise ValueError("cannot hash an absent fragment")
    return hashlib.sha256(f).digest()


def build_cross_checksum(frags: Sequence[Fragment]) -> tuple[bytes, ...]:
    if any(f is None for f in frags):
        raise ValueError("cross checksum needs every fragment present")
    return tuple(hashlib.sha256(f).digest() for f in frags)


@dataclass(frozen=True)
class SystemConfig:
    n: int
    t: int
    k: int
    m: int
    ell: int
    lam: int = DIGEST_BITS

    def __post_init__(self) -> None:
        errors = self.field_errors(strict=False)
        if errors:
            raise ValueError("; ".join(errors))

    def field_errors(self, strict: bool = True) -> list[str]:
        """Validation messages keyed by field name.

        ``strict`` adds the resilience condition n >= 2t + k, which negative
        liveness scenarios are allowed to violate.
        """
        errs = []
        if not 1 <= self.n <= 255:
            errs.append(f"n: must be in [1, 255], got {self.n}")
        if self.t < 0:
            errs.append(f"t: must be >= 0, got {self.t}")
        if not 1 <= self.k <= max(self.n, 1):
            errs.append(f"k: must be in [1, n], got {self.k}")
        if self.m < 1:
            errs.append(f"m: must be >= 1, got {self.m}")
        if self.m > 0xFFFF:
            errs.append(f"m: client ids must fit in 16 bits, got {self.m}")
        if self.ell < 1:
            errs.append(f"ell: must be >= 1, got {self.ell}")
        if self.lam != DIGEST_BITS:
            errs.append(f"lam: only {DIGEST_BITS}-bit digests are supported")
        if strict and self.n < 2 * self.t + self.k:
            errs.append(f"n: resilience requires n >= 2t+k = {2 * self.t + self.k}, got {self.n}")
        return errs

    @property
    def fragment_size(self) -> int:
        return -(-self.ell // self.k)

    @property
    def quorum(self) -> int:
        return self.t + self.k


# JSON helpers shared by the trace writer and the checker.

def pointer_to_json(p: Pointer) -> dict:
    return {
        "ts": p.ts.to_json(),
        "set": sorted(p.set),
        "hash": [h.hex() if h is not None else None for h in p.hash],
    }


def pointer_from_json(d: Mapping[str, Any]) -> Pointer:
    return Pointer(
        Timestamp(*d["ts"]),
        frozenset(d["set"]),
        tuple(bytes.fromhex(h) if h is not None else None for h in d["hash"]),
    )


def update_to_json(u: EntryUpdate) -> dict:
    out: dict[str, Any] = {}
    for f, v in u.items():
        if f == "writeptr":
            out[f] = pointer_to_json(v)
        elif f == "frozenptrlist":
            out[f] = [pointer_to_json(p) for p in v]
        else:
            out[f] = list(v) if isinstance(v, tuple) else v
    return out


def update_from_json(d: Mapping[str, Any]) -> EntryUpdate:
    fields: dict[str, Any] = {}
    for f, v in d.items():
        if f == "writeptr":
            fields[f] = pointer_from_json(v)
        elif f == "frozenptrlist":
            fields[f] = tuple(pointer_from_json(p) for p in v)
        elif f == "frozenindex":
            fields[f] = tuple(v)
        else:
            fields[f] = v
    return EntryUpdate(**fields)


def max_timestamp(tss: Iterable[Timestamp]) -> Timestamp:
    return max(tss, default=T0)

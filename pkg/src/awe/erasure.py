"""Systematic (n, k) Reed-Solomon erasure code over GF(2^8).

The generator is a Vandermonde matrix on the points 1..n, right-multiplied by
the inverse of its top k x k block so the first k fragments are the padded
source itself. Any k rows of a Vandermonde matrix on distinct points are
independent, which makes the code MDS.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from ._kernels import GF_EXP, GF_LOG, gf_invert, gf_matmul

EXHAUSTIVE_MDS_LIMIT = 8
MDS_SAMPLES = 64


def gf_pow(a: int, e: int) -> int:
    if e == 0:
        return 1
    if a == 0:
        return 0
    return int(GF_EXP[(int(GF_LOG[a]) * e) % 255])


def vandermonde(n: int, k: int) -> np.ndarray:
    return np.array([[gf_pow(i + 1, j) for j in range(k)] for i in range(n)], dtype=np.uint8)


@dataclass(frozen=True, eq=False)
class CodecParams:
    k: int
    n: int
    generator: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if not 1 <= self.k <= self.n <= 255:
            raise ValueError(f"need 1 <= k <= n <= 255, got k={self.k} n={self.n}")
        if self.generator.shape != (self.n, self.k):
            raise ValueError(f"generator must be {self.n}x{self.k}, got {self.generator.shape}")

    def __deepcopy__(self, memo):
        return self

    def fragment_size(self, ell: int) -> int:
        return -(-ell // self.k)

    @lru_cache(maxsize=None)
    def decoder(self, rows: tuple[int, ...]) -> np.ndarray:
        return gf_invert(self.generator[list(rows)])


def _check_mds(gen: np.ndarray, k: int, rng: random.Random) -> None:
    n = gen.shape[0]
    if n <= EXHAUSTIVE_MDS_LIMIT or comb(n, k) <= MDS_SAMPLES:
        subsets = itertools.combinations(range(n), k)
    else:
        subsets = (tuple(sorted(rng.sample(range(n), k))) for _ in range(MDS_SAMPLES))
    for rows in subsets:
        try:
            gf_invert(gen[list(rows)])
        except ZeroDivisionError:
            raise ValueError(f"generator is not MDS: rows {rows} are dependent") from None


@lru_cache(maxsize=None)
def codec_params(n: int, k: int) -> CodecParams:
    """Build (and MDS-validate) the systematic generator for ``(n, k)``."""
    if not 1 <= k <= n <= 255:
        raise ValueError(f"need 1 <= k <= n <= 255, got k={k} n={n}")
    v = vandermonde(n, k)
    gen = gf_matmul(v, gf_invert(v[:k]))
    gen.setflags(write=False)
    _check_mds(gen, k, random.Random(n * 256 + k))
    return CodecParams(k, n, gen)


def encode(v: bytes, params: CodecParams) -> list[bytes]:
    if not v:
        raise ValueError("cannot encode an empty value")
    k, L = params.k, params.fragment_size(len(v))
    padded = v.ljust(k * L, b"\0")
    data = np.frombuffer(padded, dtype=np.uint8).reshape(k, L)
    frags = [padded[i * L:(i + 1) * L] for i in range(k)]
    if params.n > k:
        parity = gf_matmul(params.generator[k:], data)
        frags.extend(row.tobytes() for row in parity)
    return frags


def reconstruct(frags: Sequence[Optional[bytes]], params: CodecParams, ell: int) -> Optional[bytes]:
    """Recover the ``ell``-byte source, or ``None`` with fewer than k fragments.

    Uses the k lowest-indexed fragments present. Inputs are assumed to be
    consistent with one codeword; corrupt fragments must be filtered out by
    the caller.
    """
    if len(frags) != params.n:
        raise ValueError(f"expected {params.n} fragment slots, got {len(frags)}")
    rows = tuple(i for i, f in enumerate(frags) if f is not None)[:params.k]
    if len(rows) < params.k:
        return None
    L = len(frags[rows[0]])
    if any(len(frags[i]) != L for i in rows):
        raise ValueError("fragments of one codeword must have equal length")
    if L * params.k < ell:
        raise ValueError(f"fragments of {L} bytes cannot hold {ell} bytes")
    if rows == tuple(range(params.k)):
        return b"".join(frags[i] for i in rows)[:ell]
    stacked = np.frombuffer(b"".join(frags[i] for i in rows), dtype=np.uint8).reshape(params.k, L)
    data = gf_matmul(params.decoder(rows), stacked)
    return data.tobytes()[:ell]


BACKEND = _kernels.BACKEND

"""GF(2^8) arithmetic kernels.

Two interchangeable backends: numba-compiled loops and vectorised numpy.
Set ``AWE_DISABLE_NUMBA=1`` to force the numpy path (numba is also skipped
automatically when it cannot be imported).
"""

from __future__ import annotations

import os

import numpy as np

PRIMITIVE_POLY = 0x11D  # x^8 + x^4 + x^3 + x^2 + 1


def _build_tables() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    exp = np.zeros(512, dtype=np.uint8)
    log = np.zeros(256, dtype=np.int32)
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & 0x100:
            x ^= PRIMITIVE_POLY
    exp[255:510] = exp[:255]
    # full product table; row 0 / column 0 stay zero
    a = np.arange(1, 256)
    mul = np.zeros((256, 256), dtype=np.uint8)
    mul[1:, 1:] = exp[(log[a][:, None] + log[a][None, :]) % 255]
    return exp, log, mul


GF_EXP, GF_LOG, GF_MUL = _build_tables()
GF_INV = np.zeros(256, dtype=np.uint8)
GF_INV[1:] = GF_EXP[(255 - GF_LOG[1:]) % 255]


def _numba_wanted() -> bool:
    return os.environ.get("AWE_DISABLE_NUMBA", "0").lower() not in ("1", "true", "yes")


# numpy backend --------------------------------------------------------------

def gf_matmul_numpy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.uint8)
    for j in range(a.shape[1]):
        out ^= GF_MUL[a[:, j][:, None], b[j][None, :]]
    return out


def gf_invert_numpy(a: np.ndarray) -> np.ndarray:
    """Gauss-Jordan inverse; raises ``ZeroDivisionError`` if singular."""
    n = a.shape[0]
    m = np.concatenate([a.astype(np.uint8), np.eye(n, dtype=np.uint8)], axis=1)
    for col in range(n):
        nz = np.nonzero(m[col:, col])[0]
        if nz.size == 0:
            raise ZeroDivisionError("singular matrix over GF(2^8)")
        piv = col + nz[0]
        if piv != col:
            m[[col, piv]] = m[[piv, col]]
        m[col] = GF_MUL[GF_INV[m[col, col]], m[col]]
        factors = m[:, col].copy()
        factors[col] = 0
        m ^= GF_MUL[factors[:, None], m[col][None, :]]
    return m[:, n:].copy()


# numba backend --------------------------------------------------------------

HAVE_NUMBA = False
if _numba_wanted():
    try:
        import numba

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass

if HAVE_NUMBA:
    _JIT = {"nogil": True, "cache": True}

    @numba.njit(**_JIT)
    def _matmul_jit(a, b, mul):
        r, k = a.shape
        L = b.shape[1]
        out = np.zeros((r, L), dtype=np.uint8)
        for i in range(r):
            for j in range(k):
                g = a[i, j]
                if g == 0:
                    continue
                row = mul[g]
                for x in range(L):
                    out[i, x] ^= row[b[j, x]]
        return out

    @numba.njit(**_JIT)
    def _invert_jit(a, mul, inv):
        n = a.shape[0]
        m = np.zeros((n, 2 * n), dtype=np.uint8)
        for i in range(n):
            for j in range(n):
                m[i, j] = a[i, j]
            m[i, n + i] = 1
        for col in range(n):
            piv = -1
            for r in range(col, n):
                if m[r, col] != 0:
                    piv = r
                    break
            if piv < 0:
                return m[:, n:], False
            if piv != col:
                for x in range(2 * n):
                    tmp = m[col, x]
                    m[col, x] = m[piv, x]
                    m[piv, x] = tmp
            s = inv[m[col, col]]
            for x in range(2 * n):
                m[col, x] = mul[s, m[col, x]]
            for r in range(n):
                f = m[r, col]
                if r == col or f == 0:
                    continue
                for x in range(2 * n):
                    m[r, x] ^= mul[f, m[col, x]]
        return m[:, n:].copy(), True

    def gf_matmul_numba(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return _matmul_jit(np.ascontiguousarray(a, dtype=np.uint8),
                           np.ascontiguousarray(b, dtype=np.uint8), GF_MUL)

    def gf_invert_numba(a: np.ndarray) -> np.ndarray:
        out, ok = _invert_jit(np.ascontiguousarray(a, dtype=np.uint8), GF_MUL, GF_INV)
        if not ok:
            raise ZeroDivisionError("singular matrix over GF(2^8)")
        return out

    gf_matmul = gf_matmul_numba
    gf_invert = gf_invert_numba
    BACKEND = "numba"
else:
    gf_matmul = gf_matmul_numpy
    gf_invert = gf_invert_numpy
    BACKEND = "numpy"

"""Counter-based random streams.

Every random number is a pure function of ``(root_seed, replicate_index,
tag, index)``: a Philox4x32-10 block cipher is keyed with the 64-bit root
seed and applied to a counter built from the replicate index, a stream tag
and the draw index.  Replications therefore never share state, and a path
comes out bit-identical no matter how replications are split across
threads.

Each Philox call yields four 32-bit words, which become two doubles with 52
random bits on the open interval (0, 1).  Uniform number ``j`` of a stream
is the ``j % 2``-th double of call ``j // 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np

# Stream tags keep the independent ingredients of one replication apart.
TAG_ARRIVALS = 0
TAG_SIZES = 1
TAG_GAUSS = 2

_MASK32 = 0xFFFFFFFF
_TWO_PI = 2.0 * math.pi


@nb.njit(cache=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds on uint32 words."""
    for _ in range(10):
        p0 = np.uint64(0xD2511F53) * np.uint64(c0)
        p1 = np.uint64(0xCD9E8D57) * np.uint64(c2)
        hi0 = np.uint32(p0 >> np.uint64(32))
        lo0 = np.uint32(p0 & np.uint64(0xFFFFFFFF))
        hi1 = np.uint32(p1 >> np.uint64(32))
        lo1 = np.uint32(p1 & np.uint64(0xFFFFFFFF))
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
        k0 = np.uint32(k0 + np.uint32(0x9E3779B9))
        k1 = np.uint32(k1 + np.uint32(0xBB67AE85))
    return c0, c1, c2, c3


@nb.njit(cache=True, inline="always")
def _to_open_unit(hi, lo):
    # 26 + 26 bits, centred in its cell: (k + 0.5) / 2^52 is exact, so the
    # result lies in [2^-53, 1 - 2^-53] (with 53 bits the top cell rounds to 1)
    k = (np.uint64(hi) >> np.uint64(6)) * np.uint64(67108864) + (
        np.uint64(lo) >> np.uint64(6)
    )
    return (np.float64(k) + 0.5) * (1.0 / 4503599627370496.0)


@nb.njit(cache=True)
def uniform_pair(k0, k1, rep, tag, call):
    """Two uniforms from one Philox call of stream ``(key, rep, tag)``."""
    w0, w1, w2, w3 = philox4x32(
        np.uint32(call & 0xFFFFFFFF),
        np.uint32((call >> 32) & 0xFFFFFFFF),
        np.uint32(rep),
        np.uint32(tag),
        k0,
        k1,
    )
    return _to_open_unit(w0, w1), _to_open_unit(w2, w3)


@nb.njit(cache=True)
def uniform_at(k0, k1, rep, tag, j):
    u0, u1 = uniform_pair(k0, k1, rep, tag, j >> 1)
    if j & 1:
        return u1
    return u0


@nb.njit(cache=True)
def _fill_uniforms(k0, k1, rep, tag, start, out):
    for i in range(out.shape[0]):
        out[i] = uniform_at(k0, k1, rep, tag, start + i)


@nb.njit(cache=True)
def _fill_exponentials(k0, k1, rep, tag, start, rate, out):
    for i in range(out.shape[0]):
        out[i] = -math.log(uniform_at(k0, k1, rep, tag, start + i)) / rate


@nb.njit(cache=True)
def _fill_normals(k0, k1, rep, start, out):
    # Box-Muller on uniform pairs: normal 2c is the cosine branch of call c,
    # normal 2c+1 the sine branch.
    n = out.shape[0]
    i = 0
    while i < n:
        j = start + i
        c = j >> 1
        u0, u1 = uniform_pair(k0, k1, rep, TAG_GAUSS, c)
        r = math.sqrt(-2.0 * math.log(u0))
        if j & 1:
            out[i] = r * math.sin(_TWO_PI * u1)
            i += 1
        else:
            out[i] = r * math.cos(_TWO_PI * u1)
            if i + 1 < n:
                out[i + 1] = r * math.sin(_TWO_PI * u1)
            i += 2


def split_seed(seed: int) -> tuple[np.uint32, np.uint32]:
    """Philox key words for a 64-bit seed; negative seeds wrap modulo 2**64."""
    s = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.uint32(s & _MASK32), np.uint32(s >> 32)


@dataclass(frozen=True)
class RngStream:
    """Random stream of one replication.

    ``(root_seed, replicate_index)`` fully determines every number drawn.
    Distinct replicate indices give disjoint Philox counters and hence
    independent streams.
    """

    root_seed: int
    replicate_index: int = 0

    def __post_init__(self):
        if not 0 <= self.replicate_index <= _MASK32:
            raise ValueError("replicate_index must lie in [0, 2**32)")

    @property
    def key(self) -> tuple[np.uint32, np.uint32]:
        return split_seed(self.root_seed)

    def uniforms(self, count: int, start: int = 0, tag: int = TAG_ARRIVALS) -> np.ndarray:
        out = np.empty(count, dtype=np.float64)
        k0, k1 = self.key
        _fill_uniforms(k0, k1, self.replicate_index, tag, start, out)
        return out

    def exponentials(
        self, count: int, rate: float = 1.0, start: int = 0, tag: int = TAG_ARRIVALS
    ) -> np.ndarray:
        """Exponential(rate) variates by inverse CDF on (0, 1)."""
        out = np.empty(count, dtype=np.float64)
        k0, k1 = self.key
        _fill_exponentials(k0, k1, self.replicate_index, tag, start, float(rate), out)
        return out

    def normals(self, count: int, start: int = 0) -> np.ndarray:
        out = np.empty(count, dtype=np.float64)
        k0, k1 = self.key
        _fill_normals(k0, k1, self.replicate_index, start, out)
        return out

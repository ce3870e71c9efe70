"""Counter-based splittable random streams.

Every random decision in the package is a pure function of a 64-bit stream
key and a counter, built on the SplitMix64 finalizer.  That gives three
properties the grid runner relies on:

* determinism independent of call order and thread schedule,
* cheap derivation of independent substreams (per cell / repetition / retry /
  node / predictor) without passing generator objects around,
* exact reproducibility of the same draws from the numpy fallback, the
  Cython kernels, and scalar Python (all three implement the identical
  uint64 arithmetic; the C side mirrors `_mix64`/`_raw`/`_bounded`).

Two shuffle primitives are used deliberately:

* kernels shuffle masks with a backward Fisher-Yates pass, one draw per
  step, counters laid out as ``perm_index * (n - 1) + step`` so all draws
  are addressable in bulk;
* one-off permutations and subsets (sampling, importance) sort random keys
  (`permutation`, `subset`), which vectorizes and is order-independent.

Bounded draws use the multiply-shift map ``(u * n) >> 64``; the selection
bias of O(n / 2^64) is far below Monte Carlo resolution and, unlike
rejection sampling, keeps the draw count constant, which the vectorized
fallback requires.
"""

from __future__ import annotations

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15
_STREAM_SALT = 0x5851F42D4C957F2D
_TOKEN_SALT = 0x632BE59BD9B4E019

# Substream purpose tags.  Any two derivation paths that could receive the
# same numeric tokens must differ in at least one tag.
TAG_CELL = 0x01
TAG_REP = 0x02
TAG_RETRY = 0x03
TAG_CLASS = 0x04
TAG_STRATUM = 0x05
TAG_FIT = 0x06
TAG_NODE = 0x07
TAG_PREDICTOR = 0x08
TAG_IMPORTANCE = 0x09
TAG_DRAW = 0x0A
TAG_COLUMN = 0x0B
TAG_SHUFFLE = 0x0C
TAG_FULL_FIT = 0x0D


def mix64(z: int) -> int:
    """SplitMix64 finalizer (bijective on 64-bit integers)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _fold_token(token) -> int:
    if isinstance(token, str):
        h = 0x9AE16A3B2F90404F
        for b in token.encode("utf-8"):
            h = mix64((h ^ b) + _GOLDEN)
        return h
    return int(token) & _MASK


def substream(key: int, *tokens) -> int:
    """Derive an independent stream key from `key` and a token path.

    Tokens are ints (or strings, folded bytewise).  The construction is a
    hash chain over the SplitMix64 finalizer; its output domain is salted
    apart from `raw` outputs.
    """
    k = int(key) & _MASK
    for t in tokens:
        k = mix64((k + _GOLDEN) & _MASK)
        k = mix64(k ^ mix64((_fold_token(t) * _GOLDEN + _TOKEN_SALT) & _MASK))
    return k


def raw(key: int, i: int) -> int:
    """The i-th 64-bit output of stream `key` (random access)."""
    return mix64(((int(key) ^ _STREAM_SALT) + (i + 1) * _GOLDEN) & _MASK)


def raw_array(key: int, start: int, count: int) -> np.ndarray:
    """Vectorized `raw` for counters start..start+count-1 (dtype uint64)."""
    i = np.arange(start, start + count, dtype=np.uint64)
    z = (np.uint64((int(key) ^ _STREAM_SALT) & _MASK)
         + (i + np.uint64(1)) * np.uint64(_GOLDEN))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def bounded(u: int, n: int) -> int:
    """Map a uint64 draw to [0, n) via multiply-shift (n < 2**32)."""
    hi = u >> 32
    lo = u & 0xFFFFFFFF
    return ((hi * n + ((lo * n) >> 32)) >> 32) & _MASK


def bounded_array(u: np.ndarray, n: int) -> np.ndarray:
    """Vectorized `bounded`; exact same integers as the scalar form."""
    n64 = np.uint64(n)
    hi = u >> np.uint64(32)
    lo = u & np.uint64(0xFFFFFFFF)
    return (hi * n64 + ((lo * n64) >> np.uint64(32))) >> np.uint64(32)


def uniform_array(key: int, start: int, count: int) -> np.ndarray:
    """float64 draws strictly inside (0, 1), suitable for inverse CDFs."""
    u = raw_array(key, start, count)
    return ((u >> np.uint64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)


def permutation(key: int, n: int) -> np.ndarray:
    """Uniform permutation of range(n) by sorting random keys (int64)."""
    u = raw_array(key, 0, n)
    return np.argsort(u, kind="stable").astype(np.int64)


def subset(key: int, n: int, k: int) -> np.ndarray:
    """Uniform k-subset of range(n) without replacement, sorted ascending.

    Defined as the indices of the k smallest keys (ties broken by lower
    index), i.e. exactly `sort(permutation(key, n)[:k])`, but selected in
    O(n) with argpartition plus an explicit tie fix-up.
    """
    if not 0 <= k <= n:
        raise ValueError(f"subset size {k} out of range for population {n}")
    if k == 0:
        return np.empty(0, dtype=np.int64)
    if k == n:
        return np.arange(n, dtype=np.int64)
    u = raw_array(key, 0, n)
    part = np.argpartition(u, k - 1)[:k]
    kth = u[part].max()
    picked = np.flatnonzero(u < kth)
    need = k - picked.shape[0]
    if need > 0:
        ties = np.flatnonzero(u == kth)[:need]
        picked = np.concatenate([picked, ties])
    return np.sort(picked.astype(np.int64))

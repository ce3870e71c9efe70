"""numpy implementations of the hot kernels.

This is the import-time fallback when the compiled extension is missing and
the reference the Cython kernels are tested against.  Outputs are bit
identical to `_ckernels`: the Fisher-Yates swap sequence is replayed
vectorized across permutations (same draws, same swaps), and float
reductions use cumsum / per-level accumulation, which adds in the same
order as the C loops.
"""

from __future__ import annotations

import numpy as np

from .. import rng

# Permutations are processed in chunks to bound the (chunk, n) work arrays.
# Counters are absolute (permutation r draws at r*(n-1)+step), so the chunk
# size cannot affect results.
_CHUNK_ELEMS = 4_000_000


def _chunk(n_perm: int, n: int) -> int:
    return max(1, min(n_perm, _CHUNK_ELEMS // max(n, 1)))


def _shuffled_masks(mask: np.ndarray, r0: int, r1: int, n: int, key: int) -> np.ndarray:
    """Masks for permutations r0..r1-1: backward Fisher-Yates, one row each."""
    count = r1 - r0
    out = np.tile(mask, (count, 1))
    if n < 2:
        return out
    draws = rng.raw_array(key, r0 * (n - 1), count * (n - 1)).reshape(count, n - 1)
    rows = np.arange(count)
    for step in range(n - 1):
        i = n - 1 - step
        j = rng.bounded_array(draws[:, step], i + 1).astype(np.int64)
        vi = out[:, i].copy()
        vj = out[rows, j]
        out[rows, j] = vi
        out[:, i] = vj
    return out


def perm_count_numeric(x: np.ndarray, mask: np.ndarray, mu: float,
                       dev_obs: float, n_perm: int, key: int) -> int:
    """Count permutations with |sum(x over permuted small rows) - mu| >= dev_obs."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    mask = np.ascontiguousarray(mask, dtype=np.uint8)
    n = x.shape[0]
    hits = 0
    step = _chunk(n_perm, n)
    for r0 in range(0, n_perm, step):
        r1 = min(r0 + step, n_perm)
        masks = _shuffled_masks(mask, r0, r1, n, key)
        t = np.cumsum(masks * x, axis=1)[:, -1]
        hits += int(np.count_nonzero(np.abs(t - mu) >= dev_obs))
    return hits


def perm_count_categorical(codes: np.ndarray, k: int, mask: np.ndarray,
                           stat_obs: float, n_perm: int, key: int) -> int:
    """Count permutations with chi-square(level x permuted class) >= stat_obs."""
    codes = np.ascontiguousarray(codes, dtype=np.int32)
    mask = np.ascontiguousarray(mask, dtype=np.uint8)
    n = codes.shape[0]
    s = int(np.count_nonzero(mask))
    m = np.bincount(codes, minlength=k)
    levels = [l for l in range(k) if m[l] > 0]
    selectors = [codes == l for l in levels]
    es = [(int(m[l]) * s) / n for l in levels]
    el = [(int(m[l]) * (n - s)) / n for l in levels]

    hits = 0
    step = _chunk(n_perm, n)
    for r0 in range(0, n_perm, step):
        r1 = min(r0 + step, n_perm)
        masks = _shuffled_masks(mask, r0, r1, n, key)
        stat = np.zeros(r1 - r0, dtype=np.float64)
        for idx, sel in enumerate(selectors):
            c = masks[:, sel].sum(axis=1, dtype=np.int64)
            d = c.astype(np.float64) - es[idx]
            a = d * d
            stat += a / es[idx] + a / el[idx]
        hits += int(np.count_nonzero(stat >= stat_obs))
    return hits


def route_arrays(kind, findex, cut, moff, left, right, leaf_slot, memb,
                 cat_mat, num_mat) -> np.ndarray:
    """Route every row of (cat_mat, num_mat) to a leaf slot."""
    n = max(cat_mat.shape[0], num_mat.shape[0])
    out = np.empty(n, dtype=np.int32)
    if n == 0:
        return out
    stack = [(0, np.arange(n, dtype=np.int64))]
    while stack:
        nid, idx = stack.pop()
        kd = kind[nid]
        if kd == 0:
            out[idx] = leaf_slot[nid]
            continue
        if kd == 1:
            codes = cat_mat[idx, findex[nid]]
            go_left = memb[moff[nid] + codes] == 1
        else:
            go_left = num_mat[idx, findex[nid]] <= cut[nid]
        lidx = idx[go_left]
        ridx = idx[~go_left]
        if lidx.size:
            stack.append((int(left[nid]), lidx))
        if ridx.size:
            stack.append((int(right[nid]), ridx))
    return out

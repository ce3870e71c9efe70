"""Test statistics shared by the fitting code, the exact enumerator and the
numpy kernel fallback.

Floating point here is contract, not detail: the Monte Carlo kernels exist
twice (Cython and numpy) and must count exactly the same permutations, so
every reduction that feeds a `>=` comparison is specified as a sequential
left-to-right float64 accumulation.  `seq_sum` and the per-level loop in
`chisq_from_counts` are that order; the C kernels mirror them operation for
operation.
"""

from __future__ import annotations

import itertools
from math import comb, sqrt

import numpy as np


def seq_sum(a) -> float:
    """Left-to-right float64 sum (the kernels' accumulation order)."""
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        return 0.0
    return float(np.cumsum(a)[-1])


def chisq_from_counts(c, m, s: int, n: int) -> float:
    """Pearson chi-square of a k x 2 contingency table.

    c[l] = small-class rows with level l, m[l] = rows with level l, s =
    small-class rows, n = all rows.  Levels with zero margin contribute
    nothing.  Term order: levels ascending, each term `a/es + a/el`.
    """
    stat = 0.0
    for l in range(len(m)):
        ml = int(m[l])
        if ml == 0:
            continue
        es = (ml * s) / n
        el = (ml * (n - s)) / n
        d = float(int(c[l])) - es
        a = d * d
        stat += a / es + a / el
    return stat


def chisq_2x2(a: int, nl: int, s: int, n: int) -> float:
    """Chi-square of the 2 x 2 table (left/right group x class).

    a = small-class rows in the left group, nl = left group size.  Used to
    score candidate binary partitions; all cells are exact integers.
    """
    b = nl - a
    c = s - a
    d = (n - nl) - c
    diff = float(a * d - b * c)
    num = float(n) * (diff * diff)
    den = float(nl) * float(n - nl) * float(s) * float(n - s)
    return num / den


def numeric_test_moments(x: np.ndarray, mask: np.ndarray):
    """Observed linear statistic and its permutation-null moments.

    T = sum of x over small-class rows.  Under label permutation the class
    sizes are fixed, so E[T] and Var[T] are permutation-invariant (simple
    random sampling of s values from the node):

        E[T]   = s * mean(x)
        Var[T] = s * (n - s) / (n * (n - 1)) * sum((x - mean)^2)

    Returns (t_obs, mu, sigma).  sigma is 0 for a constant column.
    """
    n = x.shape[0]
    s = int(np.count_nonzero(mask))
    t_obs = seq_sum(x * mask.astype(np.float64))
    mean = seq_sum(x) / n
    ssq = seq_sum((x - mean) ** 2)
    mu = s * mean
    var = (s * (n - s)) / (n * (n - 1)) * ssq if n > 1 else 0.0
    return t_obs, mu, sqrt(var) if var > 0.0 else 0.0


# Exact enumeration.  The null distribution of a permutation test depends on
# the class assignment only through which rows are "small", so enumerating
# the C(n, s) assignments (not the n! raw permutations) is exhaustive.

EXACT_ENUM_LIMIT = 200_000


def exact_feasible(n: int, s: int) -> bool:
    return comb(n, s) <= EXACT_ENUM_LIMIT


def exact_pvalue_categorical(codes: np.ndarray, k: int, mask: np.ndarray,
                             stat_obs: float) -> float:
    """P(chi-square >= stat_obs) over all class assignments, exactly.

    Distinct contingency tables are enumerated with multiplicity
    prod_l C(m_l, c_l); integer weights keep the count exact.
    """
    n = codes.shape[0]
    s = int(np.count_nonzero(mask))
    m = np.bincount(codes, minlength=k).astype(np.int64)
    levels = [l for l in range(k) if m[l] > 0]
    # cap_after[idx] = rows available in levels after idx, for branch pruning
    cap_after = [0] * len(levels)
    run = 0
    for idx in range(len(levels) - 1, -1, -1):
        cap_after[idx] = run
        run += int(m[levels[idx]])

    counts = np.zeros(k, dtype=np.int64)
    hits = 0

    def rec(idx: int, remaining: int, weight: int):
        nonlocal hits
        if idx == len(levels):
            if remaining == 0 and chisq_from_counts(counts, m, s, n) >= stat_obs:
                hits += weight
            return
        l = levels[idx]
        ml = int(m[l])
        lo = max(0, remaining - cap_after[idx])
        hi = min(ml, remaining)
        for cl in range(lo, hi + 1):
            counts[l] = cl
            rec(idx + 1, remaining - cl, weight * comb(ml, cl))
        counts[l] = 0

    rec(0, s, 1)
    return hits / comb(n, s)


def exact_pvalue_numeric(x: np.ndarray, mask: np.ndarray, mu: float,
                         dev_obs: float) -> float:
    """P(|T - mu| >= dev_obs) over all class assignments, exactly.

    Subset sums accumulate in ascending index order, the same addend order
    as the kernels' masked sums, so the observed assignment reproduces its
    own statistic bit for bit and is always counted.
    """
    n = x.shape[0]
    s = int(np.count_nonzero(mask))
    xs = [float(v) for v in x]
    hits = 0
    for combo in itertools.combinations(range(n), s):
        t = 0.0
        for i in combo:
            t = t + xs[i]
        if abs(t - mu) >= dev_obs:
            hits += 1
    return hits / comb(n, s)

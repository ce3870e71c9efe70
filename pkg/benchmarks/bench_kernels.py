#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

The two backends are bit-identical by construction; this script measures the
speed gap on the three hot paths (numeric permutation counting, categorical
permutation counting, batch tree routing) and verifies result equality on
every timed case.

Usage: python benchmarks/bench_kernels.py [--n-perm 9999] [--repeat 3]
"""

import argparse
import time

import numpy as np

from imbtrees import stats
from imbtrees.kernels import HAVE_C, pykernels

if HAVE_C:
    from imbtrees.kernels import _ckernels


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def _case(n, k, seed):
    g = np.random.default_rng(seed)
    x = g.normal(size=n)
    codes = g.integers(0, k, size=n).astype(np.int32)
    mask = np.zeros(n, dtype=np.uint8)
    mask[g.choice(n, size=max(1, n // 8), replace=False)] = 1
    return x, codes, mask


def bench(n_perm, repeat):
    rows = []
    for n in (64, 256, 1024, 6146):
        x, codes, mask = _case(n, 4, seed=n)
        t_obs, mu, _ = stats.numeric_test_moments(x, mask)
        dev = abs(t_obs - mu)
        py_t, py_out = _time(
            lambda: pykernels.perm_count_numeric(x, mask, mu, dev, n_perm, 7), repeat)
        row = {"kernel": "numeric", "n": n, "python_s": py_t}
        if HAVE_C:
            c_t, c_out = _time(
                lambda: _ckernels.perm_count_numeric(x, mask, mu, dev, n_perm, 7), repeat)
            assert c_out == py_out, "backend results diverged"
            row.update(c_s=c_t, speedup=py_t / c_t)
        rows.append(row)

        s = int(mask.sum())
        m = np.bincount(codes, minlength=4)
        c = np.bincount(codes[mask == 1], minlength=4)
        stat_obs = stats.chisq_from_counts(c, m, s, n)
        py_t, py_out = _time(
            lambda: pykernels.perm_count_categorical(codes, 4, mask, stat_obs, n_perm, 9),
            repeat)
        row = {"kernel": "categorical", "n": n, "python_s": py_t}
        if HAVE_C:
            c_t, c_out = _time(
                lambda: _ckernels.perm_count_categorical(codes, 4, mask, stat_obs, n_perm, 9),
                repeat)
            assert c_out == py_out, "backend results diverged"
            row.update(c_s=c_t, speedup=py_t / c_t)
        rows.append(row)

    # routing: a fitted tree over a wide synthetic dataset
    import imbtrees as it
    d = it.generate_synthetic(
        20000, 0.15,
        signal=[("sig", "categorical", 2.0, ("a", "b", "c")), ("w", "numeric", 1.2)],
        noise_predictors=3, seed=5)
    ts = it.undersample(d, it.SamplingPlan(1.0, 0.4, it.Unstratified(), seed=1), 0)
    tree = it.fit_ctree(ts, it.TreeSettings(min_split=60, min_bucket=20, n_perm=499))
    f = tree._flat
    args = (f.kind, f.findex, f.cut, f.moff, f.left, f.right, f.leaf_slot, f.memb,
            d.cat_codes, d.num_vals)
    py_t, py_out = _time(lambda: pykernels.route_arrays(*args), repeat)
    row = {"kernel": "route", "n": d.n_rows, "python_s": py_t}
    if HAVE_C:
        c_t, c_out = _time(lambda: _ckernels.route_arrays(*args), repeat)
        assert np.array_equal(c_out, py_out), "backend routing diverged"
        row.update(c_s=c_t, speedup=py_t / c_t)
    rows.append(row)
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-perm", type=int, default=9999)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if not HAVE_C:
        print("compiled kernels unavailable; timing the numpy fallback only")
    rows = bench(args.n_perm, args.repeat)
    header = f"{'kernel':<12}{'n':>7}{'python':>12}{'c':>12}{'speedup':>9}"
    print(header)
    print("-" * len(header))
    for r in rows:
        c_s = f"{r['c_s'] * 1e3:9.2f}ms" if "c_s" in r else " " * 11
        sp = f"{r['speedup']:8.1f}x" if "speedup" in r else " " * 9
        print(f"{r['kernel']:<12}{r['n']:>7}{r['python_s'] * 1e3:9.2f}ms {c_s}{sp}")


if __name__ == "__main__":
    main()

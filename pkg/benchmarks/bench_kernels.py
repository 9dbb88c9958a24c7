#!/usr/bin/env python3
"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--instances 2000] [--features 50000] [--repeat 3]

Inputs are random sparse count matrices shaped like an n-gram corpus: a
few percent density, counts skewed toward 1. Each kernel is also checked
to give identical output on both backends.
"""
import argparse
import time

import numpy as np
import scipy.sparse as sp

from opgram import kernels


def make_inputs(n, d, density, n_classes, seed):
    rng = np.random.default_rng(seed)
    X = sp.random(n, d, density=density, format="csr", random_state=rng,
                  data_rvs=lambda k: rng.geometric(0.6, size=k).astype(np.float64))
    X.sort_indices()
    y = rng.integers(0, n_classes, size=n).astype(np.int64)
    Xc = X.tocsc()
    Xc.sort_indices()
    col = np.repeat(np.arange(d), np.diff(Xc.indptr))
    order = np.lexsort((Xc.data, col))
    return {
        "X": X,
        "y": y,
        "totals": np.bincount(y, minlength=n_classes).astype(np.int64),
        "xlogx": kernels.xlogx_table(n),
        "col_indptr": Xc.indptr.astype(np.int64),
        "col_rows": Xc.indices.astype(np.int64),
        "col_rows_sorted": Xc.indices[order].astype(np.int64),
        "col_values_sorted": Xc.data[order].astype(np.float64),
    }


def best_of(fn, repeat):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run_ig_binary(k, a):
    return k.ig_binary(a["col_indptr"], a["col_rows"], a["y"], a["totals"], a["xlogx"])


def run_ig_frequency(k, a):
    return k.ig_frequency(a["col_indptr"], a["col_rows_sorted"], a["col_values_sorted"], a["y"], a["totals"], a["xlogx"])


def run_sgd(k, a, d_sgd, epochs=2):
    X = a["X"][:, :d_sgd].tocsr()
    X.sort_indices()
    ysign = np.where(a["y"] == 0, 1.0, -1.0)
    rng = np.random.default_rng(0)
    w = np.zeros(X.shape[1] + 1)
    t = 0
    for _ in range(epochs):
        t = k.sgd_hinge(X.indptr.astype(np.int64), X.indices.astype(np.int64), X.data, ysign,
                        rng.permutation(X.shape[0]).astype(np.int64), 1e-4, w, t)
    return w


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b, equal_nan=True)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--instances", type=int, default=2000)
    ap.add_argument("--features", type=int, default=50000)
    ap.add_argument("--sgd-features", type=int, default=5000, help="selected-feature width for the SVM kernel")
    ap.add_argument("--density", type=float, default=0.02)
    ap.add_argument("--classes", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    names = [n for n in ("python", "cython") if n in kernels.BACKENDS]
    a = make_inputs(args.instances, args.features, args.density, args.classes, args.seed)
    print(f"{args.instances} instances x {args.features} features, density {args.density}, "
          f"{a['X'].nnz} nonzeros, {args.classes} classes; backends: {', '.join(names)}")
    cases = [
        ("ig_binary", lambda k: run_ig_binary(k, a)),
        ("ig_frequency", lambda k: run_ig_frequency(k, a)),
        (f"sgd_hinge (d={args.sgd_features}, 2 epochs)", lambda k: run_sgd(k, a, args.sgd_features)),
    ]
    print(f"{'kernel':34s}" + "".join(f"{n:>12s}" for n in names) + ("     speedup  identical" if len(names) == 2 else ""))
    for label, fn in cases:
        times, outs = [], []
        for name in names:
            t, out = best_of(lambda: fn(kernels.get_backend(name)), args.repeat)
            times.append(t)
            outs.append(out)
        row = f"{label:34s}" + "".join(f"{t * 1e3:10.1f}ms" for t in times)
        if len(names) == 2:
            row += f"{times[0] / times[1]:11.1f}x  {same(outs[0], outs[1])!s:>9s}"
        print(row)


if __name__ == "__main__":
    main()

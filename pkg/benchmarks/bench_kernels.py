"""Compiled vs numpy kernels: tree growth and similarity rows.

    python benchmarks/bench_kernels.py [--repeat 20]

Both backends are checked for identical output before timing.
"""

import argparse
import time

import numpy as np

from netmdl._kernels import _pykernels as P

try:
    from netmdl._kernels import _ckernels as C
except ImportError:
    C = None


def timeit(fn, repeat):
    fn()  # warm up
    t = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t) / repeat


def tree_case(rng, n, d, density):
    X = np.where(rng.random((n, d)) < density, rng.integers(1, 6, (n, d)), 0).astype(float)
    y = (rng.random(n) < 0.2).astype(np.int64)
    sample = rng.integers(0, n, n)
    return X, y, sample


def sparse_case(rng, n, m, density):
    dense = np.where(rng.random((n, m)) < density, rng.integers(1, 6, (n, m)), 0).astype(float)
    rows, cols = np.nonzero(dense)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    ct = dense.T
    crow, ccol = np.nonzero(ct)
    cindptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(np.bincount(crow, minlength=m), out=cindptr[1:])
    return (indptr, cols.astype(np.int64), dense[rows, cols],
            cindptr, ccol.astype(np.int64), ct[crow, ccol])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    if C is None:
        print("compiled extension not built; only the numpy backend is available")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} {'cython':>10s} {'numpy':>10s} {'speedup':>8s}")
    for n, d, density in ((25, 400, 0.03), (75, 1500, 0.02), (150, 3000, 0.02)):
        X, y, sample = tree_case(rng, n, d, density)
        mtry = int(np.ceil(np.sqrt(d)))
        Xf, nz = np.asfortranarray(X), C.nonzero_csr(X)
        a = C.grow_tree(Xf, y, sample, 1, 8, 1, mtry, nz)
        b = P.grow_tree(X, y, sample, 1, 8, 1, mtry)
        assert all(np.array_equal(u, v) for u, v in zip(a, b))
        tc = timeit(lambda: C.grow_tree(Xf, y, sample, 1, 8, 1, mtry, nz), args.repeat)
        tp = timeit(lambda: P.grow_tree(X, y, sample, 1, 8, 1, mtry), max(1, args.repeat // 4))
        print(f"{f'grow_tree n={n} d={d}':34s} {tc * 1e3:8.3f}ms {tp * 1e3:8.3f}ms {tp / tc:7.0f}x")
    for n, m in ((500, 1000), (2000, 4000)):
        csr = sparse_case(rng, n, m, 0.06)
        assert np.array_equal(C.row_similarity(*csr, 0, n), P.row_similarity(*csr, 0, n))
        tc = timeit(lambda: [C.row_similarity(*csr, i, n) for i in range(0, n, 10)], max(1, args.repeat // 4))
        tp = timeit(lambda: [P.row_similarity(*csr, i, n) for i in range(0, n, 10)], max(1, args.repeat // 4))
        print(f"{f'row_similarity x{n // 10} n={n}':34s} {tc * 1e3:8.3f}ms {tp * 1e3:8.3f}ms {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()

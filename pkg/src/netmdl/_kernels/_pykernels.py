"""Pure numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` operation for operation so both backends
produce bit-identical trees and similarity rows.
"""

import numpy as np

BACKEND = "python"

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_LEFT_SALT = 0x14057B7EF767814F
_RIGHT_SALT = 0x5851F42D4C957F2D


def _mix(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def splitmix64(x):
    return _mix((x + _GOLDEN) & _MASK)


def child_key(key, right):
    return splitmix64(key ^ (_RIGHT_SALT if right else _LEFT_SALT))


def row_similarity(indptr, indices, data, cindptr, cindices, cdata, i, n_nodes):
    """Intersection similarity of row ``i`` against every row.

    Contributions for each target row are accumulated in ascending item
    order, matching the compiled kernel exactly.
    """
    lo, hi = indptr[i], indptr[i + 1]
    items = indices[lo:hi]
    vals = data[lo:hi]
    starts = cindptr[items]
    lens = cindptr[items + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return np.zeros(n_nodes, dtype=np.float64)
    offsets = np.repeat(starts - (np.cumsum(lens) - lens), lens)
    pos = np.arange(total, dtype=np.int64) + offsets
    nbrs = cindices[pos]
    contrib = np.minimum(cdata[pos], np.repeat(vals, lens))
    return np.bincount(nbrs, weights=contrib, minlength=n_nodes).astype(np.float64)


def _best_split(X, y, rows, key, mtry, min_leaf):
    n = rows.shape[0]
    yr = y[rows]
    pos = int(yr.sum())
    best_g = (pos * (n - pos)) / n
    best = None
    sub = X[rows]
    # features that are zero on every row of the node are constant; never candidates
    perm = np.flatnonzero((sub != 0).any(axis=0)).tolist()
    d = len(perm)
    state = key
    visited = 0
    j = 0
    nl = np.arange(1, n, dtype=np.int64)
    while j < d and visited < mtry:
        state = (state + _GOLDEN) & _MASK
        r = j + _mix(state) % (d - j)
        perm[j], perm[r] = perm[r], perm[j]
        f = perm[j]
        j += 1
        col = sub[:, f]
        if col.min() == col.max():
            continue
        visited += 1
        order = np.argsort(col, kind="stable")
        v = col[order]
        cum = np.cumsum(yr[order])[:-1]
        valid = (v[:-1] < v[1:]) & (nl >= min_leaf) & (n - nl >= min_leaf)
        if not valid.any():
            continue
        at = np.flatnonzero(valid)
        pl = cum[at]
        nlv = nl[at]
        nr = n - nlv
        pr = pos - pl
        g = (pl * (nlv - pl)) / nlv + (pr * (nr - pr)) / nr
        t = int(np.argmin(g))
        if g[t] < best_g:
            best_g = g[t]
            idx = at[t]
            thr = (v[idx] + v[idx + 1]) / 2.0
            if thr == v[idx + 1]:
                thr = v[idx]
            best = (int(f), float(thr))
    return best


def nonzero_csr(X):
    """Row pointers and column indices of the non-zero entries of a dense matrix."""
    X = np.asarray(X)
    rows, cols = np.nonzero(X)
    ptr = np.zeros(X.shape[0] + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=X.shape[0]), out=ptr[1:])
    return ptr, np.ascontiguousarray(cols, dtype=np.int64)


def grow_tree(X, y, sample, seed, max_depth, min_leaf, mtry, nz=None):
    """Grow one Gini tree over ``X[sample]``; nodes numbered in preorder.

    ``nz`` (from :func:`nonzero_csr`) is accepted for signature parity with
    the compiled kernel, which uses it to collect candidate features.
    Returns ``(left, right, feature, threshold, value)`` arrays; ``value`` is
    the leaf prediction at leaves and -1 at internal nodes.
    """
    left, right, feature, threshold, value = [], [], [], [], []
    stack = [(np.asarray(sample, dtype=np.int64), 0, splitmix64(seed & _MASK), -1, False)]
    while stack:
        rows, depth, key, parent, is_right = stack.pop()
        node = len(left)
        left.append(-1)
        right.append(-1)
        feature.append(-1)
        threshold.append(0.0)
        if parent >= 0:
            if is_right:
                right[parent] = node
            else:
                left[parent] = node
        n = rows.shape[0]
        pos = int(y[rows].sum())
        split = None
        if depth < max_depth and 0 < pos < n and n >= 2 * min_leaf:
            split = _best_split(X, y, rows, key, mtry, min_leaf)
        if split is None:
            value.append(1 if 2 * pos > n else 0)
            continue
        value.append(-1)
        f, thr = split
        feature[node] = f
        threshold[node] = thr
        go_left = X[rows, f] <= thr
        stack.append((rows[~go_left], depth + 1, child_key(key, True), node, True))
        stack.append((rows[go_left], depth + 1, child_key(key, False), node, False))
    return (
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(value, dtype=np.int64),
    )

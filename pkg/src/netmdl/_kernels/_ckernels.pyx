# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: sparse intersection similarity and Gini tree growth.

Semantics are pinned to ``_pykernels``; any change here must be mirrored
there (the parity tests compare both bit for bit).
"""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from libc.stdlib cimport qsort, malloc, free

cnp.import_array()

BACKEND = "cython"

cdef uint64_t _GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t _LEFT_SALT = 0x14057B7EF767814FULL
cdef uint64_t _RIGHT_SALT = 0x5851F42D4C957F2DULL


cdef inline uint64_t _mix(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _splitmix64(uint64_t x) nogil:
    return _mix(x + _GOLDEN)


def splitmix64(x):
    return _splitmix64(<uint64_t>x)


def child_key(key, right):
    return _splitmix64(<uint64_t>key ^ (_RIGHT_SALT if right else _LEFT_SALT))


def row_similarity(const int64_t[::1] indptr, const int64_t[::1] indices,
                   const double[::1] data, const int64_t[::1] cindptr,
                   const int64_t[::1] cindices, const double[::1] cdata,
                   Py_ssize_t i, Py_ssize_t n_nodes):
    out = np.zeros(n_nodes, dtype=np.float64)
    cdef double[::1] o = out
    cdef int64_t p, q, item
    cdef double a, b
    with nogil:
        for p in range(indptr[i], indptr[i + 1]):
            item = indices[p]
            a = data[p]
            for q in range(cindptr[item], cindptr[item + 1]):
                b = cdata[q]
                o[cindices[q]] += a if a < b else b
    return out


cdef struct Pair:
    double v
    int64_t y


cdef int _cmp_pair(const void* pa, const void* pb) noexcept nogil:
    cdef double a = (<Pair*>pa).v
    cdef double b = (<Pair*>pb).v
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


cdef struct Task:
    int64_t start
    int64_t end
    int64_t depth
    uint64_t key
    int64_t parent
    int is_right


cdef int _best_split(const double[:, :] X, const int64_t[::1] y, int64_t* rows,
                     int64_t n, uint64_t key, int64_t mtry, int64_t min_leaf,
                     int64_t* perm, int64_t d, Pair* buf, int64_t* out_f, double* out_thr) noexcept nogil:
    # perm holds the node's candidate features (non-zero on some row), ascending
    cdef int64_t pos = 0, t, j = 0, r, f, tmp, visited = 0, nl, nr, pl, pr, nz, zpos, neg
    cdef double best_g, g, lo, hi, v, thr
    cdef uint64_t state = key
    cdef int found = 0
    for t in range(n):
        pos += y[rows[t]]
    best_g = (<double>(pos * (n - pos))) / n
    while j < d and visited < mtry:
        state = state + _GOLDEN
        r = j + <int64_t>(_mix(state) % <uint64_t>(d - j))
        tmp = perm[j]
        perm[j] = perm[r]
        perm[r] = tmp
        f = perm[j]
        j += 1
        # only non-zero entries need sorting; the zero block is spliced in
        # between negatives and positives afterwards
        nz = 0
        zpos = 0
        lo = X[rows[0], f]
        hi = lo
        for t in range(n):
            v = X[rows[t], f]
            if v < lo:
                lo = v
            if v > hi:
                hi = v
            if v != 0:
                buf[nz].v = v
                buf[nz].y = y[rows[t]]
                nz += 1
            else:
                zpos += y[rows[t]]
        if lo == hi:
            continue
        visited += 1
        qsort(buf, nz, sizeof(Pair), _cmp_pair)
        if nz < n:
            neg = 0
            while neg < nz and buf[neg].v < 0:
                neg += 1
            # shift positives to the tail and fill the gap with zeros
            for t in range(nz - 1, neg - 1, -1):
                buf[t + n - nz] = buf[t]
            for t in range(neg, neg + n - nz):
                buf[t].v = 0.0
                buf[t].y = 1 if t - neg < zpos else 0
        pl = 0
        for t in range(n - 1):
            pl += buf[t].y
            nl = t + 1
            if not (buf[t].v < buf[t + 1].v):
                continue
            if nl < min_leaf or n - nl < min_leaf:
                continue
            nr = n - nl
            pr = pos - pl
            g = (<double>(pl * (nl - pl))) / nl + (<double>(pr * (nr - pr))) / nr
            if g < best_g:
                best_g = g
                thr = (buf[t].v + buf[t + 1].v) / 2.0
                if thr == buf[t + 1].v:
                    thr = buf[t].v
                out_f[0] = f
                out_thr[0] = thr
                found = 1
    return found


def nonzero_csr(X):
    """Row pointers and column indices of the non-zero entries of a dense matrix."""
    X = np.asarray(X)
    rows, cols = np.nonzero(X)
    ptr = np.zeros(X.shape[0] + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=X.shape[0]), out=ptr[1:])
    return ptr, np.ascontiguousarray(cols, dtype=np.int64)


def grow_tree(const double[:, :] X, const int64_t[::1] y, sample, seed,
              int64_t max_depth, int64_t min_leaf, int64_t mtry, nz=None):
    cdef int64_t[::1] rows = np.array(sample, dtype=np.int64)
    cdef int64_t n_rows = rows.shape[0]
    cdef int64_t cap = 2 * n_rows + 1
    cdef int64_t d = X.shape[1]
    left_a = np.full(cap, -1, dtype=np.int64)
    right_a = np.full(cap, -1, dtype=np.int64)
    feat_a = np.full(cap, -1, dtype=np.int64)
    thr_a = np.zeros(cap, dtype=np.float64)
    val_a = np.full(cap, -1, dtype=np.int64)
    cdef int64_t[::1] left = left_a
    cdef int64_t[::1] right = right_a
    cdef int64_t[::1] feature = feat_a
    cdef double[::1] threshold = thr_a
    cdef int64_t[::1] value = val_a

    cdef Task* stack = <Task*>malloc(cap * sizeof(Task))
    cdef int64_t* perm = <int64_t*>malloc((d + 1) * sizeof(int64_t))
    cdef Pair* buf = <Pair*>malloc((n_rows + 1) * sizeof(Pair))
    cdef int64_t* mark = <int64_t*>malloc((d + 1) * sizeof(int64_t))
    if stack == NULL or perm == NULL or buf == NULL or mark == NULL:
        free(stack)
        free(perm)
        free(buf)
        free(mark)
        raise MemoryError()

    # CSR of the non-zero entries of X, for collecting per-node candidate features
    if nz is None:
        nz = nonzero_csr(X)
    cdef int64_t[::1] nz_ptr = nz[0]
    cdef int64_t[::1] nz_idx = nz[1]
    cdef int64_t cc
    for cc in range(d):
        mark[cc] = -1
    cdef int64_t n_cand, q

    cdef uint64_t seed64 = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef int64_t top = 0, node_count = 0, node, n, pos, t, a, b, f
    cdef Task task
    cdef double thr
    cdef int64_t* rp
    cdef int ok
    stack[0].start = 0
    stack[0].end = n_rows
    stack[0].depth = 0
    stack[0].key = _splitmix64(seed64)
    stack[0].parent = -1
    stack[0].is_right = 0
    top = 1
    with nogil:
        while top > 0:
            top -= 1
            task = stack[top]
            node = node_count
            node_count += 1
            if task.parent >= 0:
                if task.is_right:
                    right[task.parent] = node
                else:
                    left[task.parent] = node
            n = task.end - task.start
            rp = &rows[task.start]
            pos = 0
            for t in range(n):
                pos += y[rp[t]]
            ok = 0
            if task.depth < max_depth and pos > 0 and pos < n and n >= 2 * min_leaf:
                # mark features seen in the node, then list them in ascending order
                for t in range(n):
                    for q in range(nz_ptr[rp[t]], nz_ptr[rp[t] + 1]):
                        mark[nz_idx[q]] = node
                n_cand = 0
                for q in range(d):
                    if mark[q] == node:
                        perm[n_cand] = q
                        n_cand += 1
                ok = _best_split(X, y, rp, n, task.key, mtry, min_leaf, perm, n_cand, buf, &f, &thr)
            if not ok:
                value[node] = 1 if 2 * pos > n else 0
                continue
            feature[node] = f
            threshold[node] = thr
            # partition: left block (x <= thr) first
            a = 0
            b = n - 1
            while a <= b:
                if X[rp[a], f] <= thr:
                    a += 1
                else:
                    t = rp[a]
                    rp[a] = rp[b]
                    rp[b] = t
                    b -= 1
            stack[top].start = task.start + a
            stack[top].end = task.end
            stack[top].depth = task.depth + 1
            stack[top].key = _splitmix64(task.key ^ _RIGHT_SALT)
            stack[top].parent = node
            stack[top].is_right = 1
            top += 1
            stack[top].start = task.start
            stack[top].end = task.start + a
            stack[top].depth = task.depth + 1
            stack[top].key = _splitmix64(task.key ^ _LEFT_SALT)
            stack[top].parent = node
            stack[top].is_right = 0
            top += 1
    free(stack)
    free(perm)
    free(buf)
    free(mark)
    return (left_a[:node_count].copy(), right_a[:node_count].copy(),
            feat_a[:node_count].copy(), thr_a[:node_count].copy(),
            val_a[:node_count].copy())

"""Edge sets: attribute-similarity network models (KNN, threshold) and explicit edge lists."""

from __future__ import annotations

import logging
import warnings
from pathlib import Path

import numpy as np

from ._kernels import row_similarity
from .data import DataError

log = logging.getLogger(__name__)


class EdgeSet:
    """Directed out-adjacency in CSR form.

    Neighbor lists are sorted, free of duplicates and self-loops. Undirected
    inputs are stored as reciprocal directed edges with ``directed=False``.
    """

    def __init__(self, n_nodes, indptr, indices, directed=True, dropped_self_loops=0):
        self.n_nodes = int(n_nodes)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.directed = bool(directed)
        self.dropped_self_loops = int(dropped_self_loops)

    @classmethod
    def from_pairs(cls, n_nodes, src, dst, directed=True):
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise ValueError("src and dst must have equal length")
        if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n_nodes):
            raise DataError(f"edge endpoint outside 0..{n_nodes - 1}")
        loops = src == dst
        n_loops = int(loops.sum())
        src, dst = src[~loops], dst[~loops]
        key = np.unique(src * max(n_nodes, 1) + dst)
        s, d = key // max(n_nodes, 1), key % max(n_nodes, 1)
        indptr = np.zeros(n_nodes + 1, dtype=np.int64)
        np.add.at(indptr, s + 1, 1)
        return cls(n_nodes, np.cumsum(indptr), d, directed, n_loops)

    @classmethod
    def from_lists(cls, lists, directed=True):
        src = np.repeat(np.arange(len(lists)), [len(x) for x in lists])
        dst = np.concatenate([np.asarray(x, dtype=np.int64) for x in lists]) if lists else []
        return cls.from_pairs(len(lists), src, dst, directed)

    @classmethod
    def empty(cls, n_nodes, directed=True):
        return cls(n_nodes, np.zeros(n_nodes + 1, np.int64), [], directed)

    def neighbors(self, i):
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def out_degree(self):
        return np.diff(self.indptr)

    def in_degree(self):
        return np.bincount(self.indices, minlength=self.n_nodes)

    @property
    def n_edges(self):
        return int(self.indices.size)

    def sources(self):
        return np.repeat(np.arange(self.n_nodes, dtype=np.int64), self.out_degree())

    def pairs(self):
        """Set of directed (src, dst) tuples."""
        return set(zip(self.sources().tolist(), self.indices.tolist()))

    def adjacency_lists(self):
        return [self.neighbors(i).tolist() for i in range(self.n_nodes)]

    def induced(self, keep):
        """Subgraph keeping only edges whose two endpoints are both in ``keep`` (bool mask)."""
        keep = np.asarray(keep, dtype=bool)
        src = self.sources()
        mask = keep[src] & keep[self.indices]
        indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.add.at(indptr, src[mask] + 1, 1)
        return EdgeSet(self.n_nodes, np.cumsum(indptr), self.indices[mask], self.directed)

    def __eq__(self, other):
        if not isinstance(other, EdgeSet):
            return NotImplemented
        return (
            self.n_nodes == other.n_nodes
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
        )

    def __repr__(self):
        return f"EdgeSet(n_nodes={self.n_nodes}, n_edges={self.n_edges}, directed={self.directed})"


def d_int(a, b):
    """Sum of element-wise minima of two sparse vectors.

    Each argument is an ``(indices, values)`` pair with sorted indices, or a
    ``{item: value}`` mapping.
    """
    ai, av = _as_sparse(a)
    bi, bv = _as_sparse(b)
    total = 0.0
    p = q = 0
    while p < len(ai) and q < len(bi):
        if ai[p] == bi[q]:
            total += min(av[p], bv[q])
            p += 1
            q += 1
        elif ai[p] < bi[q]:
            p += 1
        else:
            q += 1
    return total


def _as_sparse(v):
    if isinstance(v, dict):
        keys = sorted(k for k, x in v.items() if x != 0)
        return keys, [v[k] for k in keys]
    idx, val = v
    return list(idx), list(val)


def similarity_row(A, i):
    """d_int of node ``i`` against every node (including itself)."""
    cindptr, cindices, cdata = A.csc()
    return row_similarity(A.indptr, A.indices, A.data, cindptr, cindices, cdata, int(i), A.n_nodes)


def knn_k(n_nodes, rho):
    return int(rho) // int(n_nodes)


def build_knn(A, rho):
    """Directed graph with out-edges from each node to its ``floor(rho/|V|)`` most similar nodes.

    Ties in similarity go to the smaller node id.
    """
    n = A.n_nodes
    if n < 2:
        raise ValueError("KNN needs at least two nodes")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    k = knn_k(n, rho)
    if k > n - 1:
        raise ValueError(f"k = floor(rho/|V|) = {k} exceeds |V| - 1 = {n - 1}")
    if k == 0:
        return EdgeSet.empty(n)
    lists = []
    for i in range(n):
        sims = similarity_row(A, i)
        sims[i] = -np.inf
        lists.append(np.sort(np.argsort(-sims, kind="stable")[:k]))
    indptr = np.arange(0, n * k + 1, k, dtype=np.int64)
    return EdgeSet(n, indptr, np.concatenate(lists), directed=True)


def top_pairs(A, rho):
    """The ``rho`` most similar unordered pairs ``(i, j)``, ``i < j``.

    Only co-active pairs are scored through the inverted item index; if there
    are fewer than ``rho`` of them the remainder is filled with zero-similarity
    pairs in lexicographic order. Ties go to the lexicographically smaller pair.
    """
    n = A.n_nodes
    rho = int(rho)
    if rho < 0 or rho > n * (n - 1) // 2:
        raise ValueError(f"rho = {rho} exceeds the {n * (n - 1) // 2} available pairs")
    if rho == 0:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0)
    si, sj, ss = [], [], []
    for i in range(n - 1):
        sims = similarity_row(A, i)
        j = np.flatnonzero(sims[i + 1:] > 0) + i + 1
        si.append(np.full(j.size, i, dtype=np.int64))
        sj.append(j)
        ss.append(sims[j])
    si = np.concatenate(si) if si else np.zeros(0, np.int64)
    sj = np.concatenate(sj) if sj else np.zeros(0, np.int64)
    ss = np.concatenate(ss) if ss else np.zeros(0)
    order = np.lexsort((sj, si, -ss))[:rho]
    pi, pj, ps = si[order], sj[order], ss[order]
    if pi.size < rho:
        need = rho - pi.size
        coactive = set(zip(si.tolist(), sj.tolist()))
        fi, fj = [], []
        for i in range(n - 1):
            for j in range(i + 1, n):
                if (i, j) not in coactive:
                    fi.append(i)
                    fj.append(j)
                    if len(fi) == need:
                        break
            if len(fi) == need:
                break
        pi = np.concatenate([pi, fi]).astype(np.int64)
        pj = np.concatenate([pj, fj]).astype(np.int64)
        ps = np.concatenate([ps, np.zeros(need)])
    return np.stack([pi, pj], axis=1), ps


def build_threshold(A, rho):
    """Keep the ``rho`` most similar pairs; each becomes two directed edges."""
    pairs, _ = top_pairs(A, rho)
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    return EdgeSet.from_pairs(A.n_nodes, src, dst, directed=False)


def load_edges(path, n_nodes):
    """Read a whitespace-delimited ``src dst`` edge list.

    Duplicates are merged; self-loops are dropped and counted on
    ``EdgeSet.dropped_self_loops``.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    src, dst = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise DataError(f"{path}: line {lineno}: expected 'src dst', got {line.strip()!r}")
            try:
                s, d = int(parts[0]), int(parts[1])
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-integer node id") from None
            if s < 0 or d < 0 or s >= n_nodes or d >= n_nodes:
                raise DataError(f"{path}: line {lineno}: node id outside 0..{n_nodes - 1}")
            src.append(s)
            dst.append(d)
    edges = EdgeSet.from_pairs(n_nodes, src, dst, directed=True)
    if edges.dropped_self_loops:
        msg = f"{path}: dropped {edges.dropped_self_loops} self-loop(s)"
        log.warning(msg)
        warnings.warn(msg, stacklevel=2)
    return edges


def write_edges(edges, path):
    with open(path, "w", encoding="utf-8") as fh:
        for s, d in zip(edges.sources().tolist(), edges.indices.tolist()):
            fh.write(f"{s} {d}\n")

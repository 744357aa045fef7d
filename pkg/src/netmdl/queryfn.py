"""Bounded network query functions and the representations they sample from.

Seven kinds are supported:

==============  =====================  ==========================
kind            payload                encoded size
==============  =====================  ==========================
activity_top    RankedList             O(ell)
degree_top      RankedList             O(ell)
cluster         CommunityMap           O(|V|)
random          NodePool               O(|V|)
bfs             EdgeSet                O(|E|)
activity_net    AdHocNet               O(|V| * m)
degree_net      AdHocNet               O(|V| * m)
==============  =====================  ==========================
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .netmodel import EdgeSet, similarity_row

KINDS = ("bfs", "cluster", "degree_top", "activity_top", "degree_net", "activity_net", "random")

DEFAULT_M = 200
LPA_MAX_ITER = 20


def default_ell(K):
    return max(500, 2 * max(K))


class InsufficientNodes(Exception):
    """The candidate universe for a query holds fewer than ``k`` eligible nodes."""


@dataclass(frozen=True)
class RankedList:
    ids: np.ndarray
    ell: int

    def __post_init__(self):
        object.__setattr__(self, "ids", np.asarray(self.ids, dtype=np.int64))


@dataclass(frozen=True)
class CommunityMap:
    """Per-node community ids; -1 marks nodes dropped by reach pruning."""

    assignment: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "assignment", np.asarray(self.assignment, dtype=np.int64))

    @property
    def n_communities(self):
        a = self.assignment[self.assignment >= 0]
        return int(np.unique(a).size)

    def members(self, c):
        return np.flatnonzero(self.assignment == c)

    def groups(self):
        """Member lists of the non-empty communities, ordered by smallest member."""
        a = self.assignment
        nodes = np.flatnonzero(a >= 0)
        order = np.lexsort((nodes, a[nodes]))
        nodes = nodes[order]
        labels = a[nodes]
        cuts = np.flatnonzero(np.diff(labels)) + 1
        groups = np.split(nodes, cuts) if nodes.size else []
        groups.sort(key=lambda g: int(g[0]))
        return groups


@dataclass(frozen=True)
class AdHocNet:
    """Exemplar network: every node points at ``m`` nodes of a ranked pool."""

    edges: EdgeSet
    pool: np.ndarray
    m: int

    def __post_init__(self):
        object.__setattr__(self, "pool", np.asarray(self.pool, dtype=np.int64))


@dataclass(frozen=True)
class NodePool:
    ids: np.ndarray
    n_nodes: int

    def __post_init__(self):
        object.__setattr__(self, "ids", np.asarray(self.ids, dtype=np.int64))


_PAYLOAD = {
    "bfs": EdgeSet,
    "cluster": CommunityMap,
    "degree_top": RankedList,
    "activity_top": RankedList,
    "degree_net": AdHocNet,
    "activity_net": AdHocNet,
    "random": NodePool,
}


@dataclass(frozen=True)
class QueryRep:
    kind: str
    payload: object
    n_nodes: int
    ell: int | None = None
    m: int | None = None

    def __post_init__(self):
        if self.kind not in _PAYLOAD:
            raise ValueError(f"unknown query kind {self.kind!r}")
        if not isinstance(self.payload, _PAYLOAD[self.kind]):
            raise TypeError(f"{self.kind} needs a {_PAYLOAD[self.kind].__name__} payload")


@dataclass(frozen=True)
class QuerySample:
    seed_node: int
    k: int
    members: np.ndarray


@dataclass
class ReachLog:
    """Nodes touched by any query during one evaluation run."""

    n_nodes: int
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.mask is None:
            self.mask = np.zeros(self.n_nodes, dtype=bool)

    def touch(self, ids):
        self.mask[np.asarray(ids, dtype=np.int64)] = True

    def merge(self, other):
        self.mask |= other.mask
        return self

    @property
    def touched(self):
        return set(np.flatnonzero(self.mask).tolist())

    def __len__(self):
        return int(self.mask.sum())


def make_random(n_nodes):
    return QueryRep("random", NodePool(np.arange(n_nodes), n_nodes), n_nodes)


def make_bfs(edges):
    return QueryRep("bfs", edges, edges.n_nodes)


def make_cluster(edges, seed=0):
    return QueryRep("cluster", detect_communities(edges, seed), edges.n_nodes)


def make_top(kind, ranked, n_nodes):
    return QueryRep(kind, ranked, n_nodes, ell=ranked.ell)


def make_net(kind, net, n_nodes, ell):
    return QueryRep(kind, net, n_nodes, ell=ell, m=net.m)


def _choose(rng, pool, k):
    if len(pool) < k:
        raise InsufficientNodes(f"{len(pool)} eligible nodes for k={k}")
    return np.sort(rng.choice(pool, size=k, replace=False))


def bfs_levels(edges, i, limit):
    """BFS levels from ``i`` (excluding ``i``) until at least ``limit`` nodes are collected.

    The last returned level is always complete.
    """
    seen = {int(i)}
    frontier = [int(i)]
    levels = []
    total = 0
    while frontier and total < limit:
        nxt = []
        for u in frontier:
            for v in edges.neighbors(u).tolist():
                if v not in seen:
                    seen.add(v)
                    nxt.append(v)
        if nxt:
            levels.append(np.array(nxt, dtype=np.int64))
            total += len(nxt)
        frontier = nxt
    return levels


def _sample_bfs(edges, i, k, rng, cache):
    levels = None
    if cache is not None:
        got = cache.get(("bfs", i))
        if got is not None and (got[0] >= k or got[1]):
            levels = got[2]
    if levels is None:
        levels = bfs_levels(edges, i, k)
        if cache is not None:
            total = sum(len(lv) for lv in levels)
            cache[("bfs", i)] = (total, total < k, levels)
    inner = []
    count = 0
    for lv in levels:
        if count + len(lv) >= k:
            rest = k - count
            picked = rng.choice(lv, size=rest, replace=False) if rest < len(lv) else lv
            return np.sort(np.concatenate(inner + [picked]))
        inner.append(lv)
        count += len(lv)
    raise InsufficientNodes(f"only {count} nodes reachable from {i} for k={k}")


def query(rep, i, k, rng, log=None, cache=None):
    """Draw ``k`` distinct nodes other than ``i`` from ``rep``.

    ``rng`` is a :class:`numpy.random.Generator`; ``log`` (a :class:`ReachLog`)
    records the seed and every returned node. ``cache`` is an optional dict
    for memoising deterministic per-seed work (BFS levels) across calls.
    """
    i = int(i)
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 <= i < rep.n_nodes:
        raise ValueError(f"node {i} outside 0..{rep.n_nodes - 1}")
    p = rep.payload
    kind = rep.kind
    if kind == "random":
        if p.n_nodes - 1 < k:
            raise InsufficientNodes(f"{p.n_nodes - 1} eligible nodes for k={k}")
        draw = rng.choice(p.n_nodes - 1, size=k, replace=False)
        members = np.sort(np.where(draw >= i, draw + 1, draw))
    elif kind == "bfs":
        members = _sample_bfs(p, i, k, rng, cache)
    elif kind == "cluster":
        c = p.assignment[i]
        pool = p.members(c) if c >= 0 else np.zeros(0, np.int64)
        members = _choose(rng, pool[pool != i], k)
    elif kind in ("degree_top", "activity_top"):
        members = _choose(rng, p.ids[p.ids != i], k)
    else:
        members = _choose(rng, p.edges.neighbors(i), k)
    if log is not None:
        log.touch(members)
        log.touch([i])
    return QuerySample(i, k, members)


def detect_communities(edges, seed=0, max_iter=LPA_MAX_ITER):
    """Label propagation over the symmetrised graph.

    Nodes are visited in a seeded random order each sweep and adopt the most
    frequent neighbor label, ties broken uniformly with the same seeded
    stream; a node keeps its label when that label is among the most
    frequent. Stops when a sweep changes nothing or after ``max_iter``
    sweeps. Isolated nodes stay singletons. Community ids are renumbered by
    smallest member.
    """
    n = edges.n_nodes
    src = edges.sources()
    und = EdgeSet.from_pairs(n, np.concatenate([src, edges.indices]), np.concatenate([edges.indices, src]))
    nbrs = [und.neighbors(v).tolist() for v in range(n)]
    labels = list(range(n))
    rng = np.random.default_rng(seed)
    for _ in range(max_iter):
        changed = False
        for v in rng.permutation(n).tolist():
            if not nbrs[v]:
                continue
            counts = {}
            for u in nbrs[v]:
                counts[labels[u]] = counts.get(labels[u], 0) + 1
            top = max(counts.values())
            best = sorted(lab for lab, c in counts.items() if c == top)
            if labels[v] in best:
                continue
            labels[v] = best[int(rng.integers(len(best)))] if len(best) > 1 else best[0]
            changed = True
        if not changed:
            break
    remap = {}
    out = np.empty(n, dtype=np.int64)
    for v in range(n):
        out[v] = remap.setdefault(labels[v], len(remap))
    return CommunityMap(out)


def _ranked(key, ell):
    n = key.size
    if ell > n:
        raise ValueError(f"ell = {ell} exceeds |V| = {n}")
    order = np.lexsort((np.arange(n), -key))
    return RankedList(order[:ell], ell)


def rank_by_activity(A, ell):
    """Nodes by descending number of non-zero attributes, ties by node id."""
    return _ranked(A.activity().astype(np.int64), int(ell))


def rank_by_degree(edges, ell):
    """Nodes by descending in-degree + out-degree, ties by node id."""
    return _ranked((edges.out_degree() + edges.in_degree()).astype(np.int64), int(ell))


def build_adhoc_net(ranked, A, m):
    """Each node points at the ``m`` pool members most similar to it (d_int).

    The node itself is never a target; ties go to the smaller node id.
    """
    pool = np.asarray(ranked.ids, dtype=np.int64)
    m = int(m)
    if m >= pool.size:
        raise ValueError(f"m = {m} must be smaller than the pool size {pool.size}")
    n = A.n_nodes
    # sims[p, v] = d_int(a_pool[p], a_v); d_int is symmetric
    sims = np.stack([similarity_row(A, p) for p in pool]) if pool.size else np.zeros((0, n))
    lists = []
    for v in range(n):
        s = sims[:, v].copy()
        s[pool == v] = -np.inf
        order = np.lexsort((pool, -s))[:m]
        lists.append(np.sort(pool[order]))
    indptr = np.arange(0, n * m + 1, m, dtype=np.int64)
    edges = EdgeSet(n, indptr, np.concatenate(lists) if lists else [], directed=True)
    return AdHocNet(edges, pool, m)


def prune_to_reach(rep, log):
    """Restrict a representation to the nodes in ``log``.

    Graphs keep the induced subgraph; lists and partitions drop elements
    outside the reach-set. Kind and parameters are preserved.
    """
    keep = np.asarray(log.mask, dtype=bool)
    p = rep.payload
    if isinstance(p, EdgeSet):
        new = p.induced(keep)
    elif isinstance(p, AdHocNet):
        new = AdHocNet(p.edges.induced(keep), p.pool[keep[p.pool]], p.m)
    elif isinstance(p, CommunityMap):
        new = CommunityMap(np.where(keep, p.assignment, -1))
    elif isinstance(p, RankedList):
        new = RankedList(p.ids[keep[p.ids]], p.ell)
    else:
        new = NodePool(p.ids[keep[p.ids]], p.n_nodes)
    return replace(rep, payload=new)

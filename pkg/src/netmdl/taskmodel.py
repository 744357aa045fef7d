"""Random-forest task models trained on query samples, and their encodable form."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import grow_tree, nonzero_csr


@dataclass(frozen=True)
class ForestHyper:
    n_trees: int = 10
    max_depth: int = 8
    min_leaf: int = 1
    feature_subsample: int | None = None  # None -> ceil(sqrt(d)) of the sample-local features
    bootstrap: bool = True

    def mtry(self, d):
        if d == 0:
            return 1
        m = self.feature_subsample if self.feature_subsample is not None else math.ceil(math.sqrt(d))
        return max(1, min(int(m), d))

    @classmethod
    def from_json(cls, doc):
        return cls(**doc)


@dataclass
class TrainSet:
    """Dense sample-local design matrix over ``feature_map`` (item ids active in the sample)."""

    features: np.ndarray
    targets: np.ndarray
    feature_map: np.ndarray

    @classmethod
    def from_nodes(cls, A, nodes, labels):
        """Rows of ``A`` for ``nodes`` with targets ``labels[nodes]``."""
        nodes = np.asarray(nodes, dtype=np.int64)
        starts = A.indptr[nodes]
        lens = A.indptr[nodes + 1] - starts
        pos = np.arange(int(lens.sum()), dtype=np.int64) + np.repeat(starts - (np.cumsum(lens) - lens), lens)
        cols = A.indices[pos]
        fmap, local = np.unique(cols, return_inverse=True)
        X = np.zeros((nodes.size, fmap.size), dtype=np.float64)
        X[np.repeat(np.arange(nodes.size), lens), local] = A.data[pos]
        y = np.asarray(labels, dtype=np.int64)[nodes]
        return cls(X, y, fmap)

    @classmethod
    def from_rows(cls, rows, targets):
        """From sparse ``(indices, values)`` rows or ``{item: value}`` dicts."""
        pairs = []
        for r in rows:
            if isinstance(r, dict):
                keys = sorted(r)
                pairs.append((np.array(keys, dtype=np.int64), np.array([r[k] for k in keys], dtype=float)))
            else:
                pairs.append((np.asarray(r[0], dtype=np.int64), np.asarray(r[1], dtype=float)))
        fmap = np.unique(np.concatenate([p[0] for p in pairs])) if pairs else np.zeros(0, np.int64)
        X = np.zeros((len(pairs), fmap.size))
        for k, (idx, val) in enumerate(pairs):
            X[k, np.searchsorted(fmap, idx)] = val
        return cls(X, np.asarray(targets, dtype=np.int64), fmap.astype(np.int64))

    def __len__(self):
        return int(self.targets.size)


@dataclass(frozen=True)
class DecisionTree:
    left: tuple
    right: tuple
    feature: tuple
    threshold: tuple
    leaf_value: tuple
    _value: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        left = np.asarray(self.left, dtype=np.int64)
        n = left.size
        if not (len(self.right) == len(self.feature) == len(self.threshold) == n):
            raise ValueError("tree lists must share one length")
        is_leaf = left < 0
        if int(is_leaf.sum()) != len(self.leaf_value):
            raise ValueError("one leaf value per leaf required")
        value = np.full(n, -1, dtype=np.int64)
        value[is_leaf] = np.asarray(self.leaf_value, dtype=np.int64)
        object.__setattr__(self, "_value", value)

    @property
    def n_nodes(self):
        return len(self.left)

    def apply(self, x):
        node = 0
        left, right, feat, thr = self.left, self.right, self.feature, self.threshold
        while left[node] >= 0:
            node = left[node] if x[feat[node]] <= thr[node] else right[node]
        return int(self._value[node])

    @property
    def depth(self):
        depth = [0] * self.n_nodes
        for v in range(self.n_nodes):
            if self.left[v] >= 0:
                depth[self.left[v]] = depth[self.right[v]] = depth[v] + 1
        return max(depth)


@dataclass(frozen=True)
class TrainedForest:
    trees: tuple
    feature_map: tuple

    @property
    def n_trees(self):
        return len(self.trees)


def _tree_from_arrays(left, right, feature, threshold, value):
    leaves = value >= 0
    return DecisionTree(
        tuple(left.tolist()),
        tuple(right.tolist()),
        tuple(feature.tolist()),
        tuple(threshold.tolist()),
        tuple(value[leaves].tolist()),
    )


def train_forest(data, hyper=ForestHyper(), rng=None):
    """Gini random forest over a :class:`TrainSet`.

    Per tree, one 63-bit seed and (when bootstrapping) the resample indices
    are drawn from ``rng``; split-feature shuffles are derived from the seed
    by node position, so a tree grown deeper refines the shallower one.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    k = len(data)
    if k == 0:
        raise ValueError("cannot train on an empty sample")
    # column-major: split search scans one feature over the node's rows
    Xc = np.ascontiguousarray(data.features, dtype=np.float64)
    nz = nonzero_csr(Xc)
    X = np.asfortranarray(Xc)
    y = np.ascontiguousarray(data.targets, dtype=np.int64)
    mtry = hyper.mtry(X.shape[1])
    trees = []
    for _ in range(hyper.n_trees):
        seed = int(rng.integers(0, 2**63))
        sample = rng.integers(0, k, k) if hyper.bootstrap else np.arange(k)
        arrays = grow_tree(X, y, sample, seed, hyper.max_depth, hyper.min_leaf, mtry, nz)
        trees.append(_tree_from_arrays(*arrays))
    return TrainedForest(tuple(trees), tuple(np.asarray(data.feature_map, dtype=np.int64).tolist()))


def _localize(forest, a):
    fmap = np.asarray(forest.feature_map, dtype=np.int64)
    x = np.zeros(fmap.size)
    if isinstance(a, dict):
        idx = np.array(sorted(a), dtype=np.int64)
        val = np.array([a[i] for i in idx.tolist()], dtype=float)
    else:
        idx = np.asarray(a[0], dtype=np.int64)
        val = np.asarray(a[1], dtype=float)
    if fmap.size and idx.size:
        pos = np.searchsorted(fmap, idx)
        pos_c = np.minimum(pos, fmap.size - 1)
        hit = fmap[pos_c] == idx
        x[pos_c[hit]] = val[hit]
    return x


def votes(forest, a):
    x = _localize(forest, a)
    return sum(t.apply(x) for t in forest.trees)


def predict(forest, a):
    """Majority vote; an even split predicts 0. Items outside the feature map count as 0."""
    return 1 if 2 * votes(forest, a) > forest.n_trees else 0


def forest_repr(forest):
    """``[feature_map, [[left, right, feature, threshold, leaf_value], ...]]`` as plain lists."""
    return [
        list(forest.feature_map),
        [[list(t.left), list(t.right), list(t.feature), list(t.threshold), list(t.leaf_value)] for t in forest.trees],
    ]


def forest_from_repr(obj):
    fmap, trees = obj
    return TrainedForest(
        tuple(DecisionTree(tuple(l), tuple(r), tuple(f), tuple(float(x) for x in th), tuple(v)) for l, r, f, th, v in trees),
        tuple(fmap),
    )


class ForestTask:
    """Task-model adapter used by the evaluator: train, predict, encode."""

    name = "random_forest"

    def __init__(self, hyper=ForestHyper()):
        self.hyper = hyper

    def train(self, data, rng):
        return train_forest(data, self.hyper, rng)

    def predict(self, model, a):
        return predict(model, a)

    def encode(self, model):
        return forest_repr(model)

import numpy as np
import pytest

from netmdl.data import AttributeMatrix
from netmdl.mdl import serialize
from netmdl.taskmodel import (
    DecisionTree,
    ForestHyper,
    ForestTask,
    TrainedForest,
    TrainSet,
    forest_from_repr,
    forest_repr,
    predict,
    train_forest,
    votes,
)

from gen import random_forest, separable
from oracles import traverse


def _rows(X):
    return [{j: float(v) for j, v in enumerate(r) if v} for r in X]


def train_accuracy(X, y, hyper, seed=0):
    ts = TrainSet.from_rows(_rows(X), y)
    forest = train_forest(ts, hyper, np.random.default_rng(seed))
    pred = [predict(forest, r) for r in _rows(X)]
    return float(np.mean(np.array(pred) == y)), forest


def test_mtry():
    h = ForestHyper()
    assert h.mtry(100) == 10 and h.mtry(10) == 4 and h.mtry(0) == 1
    assert ForestHyper(feature_subsample=50).mtry(10) == 10


def test_trainset_from_nodes():
    A = AttributeMatrix.from_rows([{0: 1.0}, {3: 2.0, 5: 1.0}, {}, {5: 4.0}], n_items=6)
    ts = TrainSet.from_nodes(A, [1, 3], np.array([0, 1, 0, 1]))
    assert ts.feature_map.tolist() == [3, 5]
    assert ts.features.tolist() == [[2.0, 1.0], [0.0, 4.0]]
    assert ts.targets.tolist() == [1, 1]


def test_all_positive_single_leaves():
    ts = TrainSet.from_rows([{0: 1.0}, {1: 2.0}, {0: 3.0}], [1, 1, 1])
    forest = train_forest(ts, ForestHyper(), np.random.default_rng(0))
    assert all(t.n_nodes == 1 and t.leaf_value == (1,) for t in forest.trees)
    assert predict(forest, {}) == 1 and predict(forest, {7: 9.0}) == 1


def test_empty_training_set():
    with pytest.raises(ValueError):
        train_forest(TrainSet(np.zeros((0, 0)), np.zeros(0, np.int64), np.zeros(0, np.int64)))


def test_separable_accuracy():
    X, y = separable()
    acc, _ = train_accuracy(X, y, ForestHyper())
    assert acc >= 0.95


def test_deterministic_serialization():
    X, y = separable(1, 80)
    ts = TrainSet.from_rows(_rows(X), y)
    a = train_forest(ts, ForestHyper(), np.random.default_rng(5))
    b = train_forest(ts, ForestHyper(), np.random.default_rng(5))
    assert serialize(forest_repr(a)) == serialize(forest_repr(b))


def test_tie_predicts_zero():
    leaf1 = DecisionTree((-1,), (-1,), (-1,), (0.0,), (1,))
    leaf0 = DecisionTree((-1,), (-1,), (-1,), (0.0,), (0,))
    forest = TrainedForest((leaf1, leaf0), ())
    assert votes(forest, {}) == 1
    assert predict(forest, {}) == 0
    assert predict(TrainedForest((leaf1,), ()), {3: 1.0}) == 1


def test_votes_match_traversal_oracle():
    rng = np.random.default_rng(2)
    forest, X, _ = random_forest(rng, n_trees=7, max_depth=5)
    rep = forest_repr(forest)
    fmap = rep[0]
    for _ in range(20):
        x = np.where(rng.random(X.shape[1]) < 0.5, rng.integers(0, 7, X.shape[1]), 0).astype(float)
        local = [x[f] for f in range(len(fmap))]
        expect = sum(traverse(t, local) for t in rep[1])
        assert votes(forest, {fmap[j]: x[j] for j in range(len(fmap)) if x[j]}) == expect


def test_unknown_items_are_zero():
    ts = TrainSet.from_rows([{10: 1.0}, {10: 5.0}, {20: 2.0}, {20: 3.0}], [0, 1, 0, 1])
    forest = train_forest(ts, ForestHyper(bootstrap=False, n_trees=1), np.random.default_rng(0))
    assert predict(forest, {10: 5.0, 99: 7.0}) == predict(forest, {10: 5.0})


def test_repr_roundtrip_50():
    rng = np.random.default_rng(3)
    for _ in range(50):
        forest, _, _ = random_forest(rng)
        rep = forest_repr(forest)
        back = forest_from_repr(rep)
        assert back == forest
        assert forest_repr(back) == rep


def test_single_leaf_repr_minimal():
    forest = train_forest(TrainSet.from_rows([{0: 1.0}, {0: 2.0}], [0, 0]), ForestHyper(n_trees=1))
    assert forest_repr(forest) == [[0], [[[-1], [-1], [-1], [0.0], [0]]]]


def test_deeper_repr_never_shorter():
    rng = np.random.default_rng(4)
    for _ in range(20):
        X = np.where(rng.random((40, 6)) < 0.6, rng.integers(1, 9, (40, 6)), 0).astype(float)
        y = (rng.random(40) < 0.5).astype(np.int64)
        ts = TrainSet.from_rows(_rows(X), y)
        seed = int(rng.integers(1 << 30))
        deep = train_forest(ts, ForestHyper(max_depth=6), np.random.default_rng(seed))
        shallow = train_forest(ts, ForestHyper(max_depth=1), np.random.default_rng(seed))
        count = lambda f: sum(len(t.left) for t in f.trees)
        assert count(deep) >= count(shallow)


def test_depth_monotone_training_accuracy():
    # one tree, no bootstrap: a deeper tree refines the shallower one node for node
    rng = np.random.default_rng(5)
    for _ in range(15):
        X = np.where(rng.random((60, 10)) < 0.5, rng.integers(1, 9, (60, 10)), 0).astype(float)
        y = (rng.random(60) < 0.5).astype(np.int64)
        prev = -1.0
        for depth in range(0, 8):
            acc, _ = train_accuracy(X, y, ForestHyper(n_trees=1, max_depth=depth, bootstrap=False), seed=9)
            assert acc >= prev
            prev = acc


def test_predict_invariant_to_tree_order():
    rng = np.random.default_rng(6)
    forest, X, _ = random_forest(rng, n_trees=5, max_depth=4)
    shuffled = TrainedForest(tuple(reversed(forest.trees)), forest.feature_map)
    for _ in range(20):
        a = {int(j): float(rng.integers(1, 6)) for j in rng.choice(forest.feature_map, 3)} if forest.feature_map else {}
        assert predict(forest, a) == predict(shuffled, a)


def test_tree_validation():
    with pytest.raises(ValueError):
        DecisionTree((1, -1), (-1,), (0, -1), (0.5, 0.0), (1,))
    with pytest.raises(ValueError):
        DecisionTree((1, -1, -1), (2, -1, -1), (0, -1, -1), (0.5, 0.0, 0.0), (1,))


def test_forest_task_adapter():
    X, y = separable(2, 60)
    task = ForestTask(ForestHyper(n_trees=3))
    m = task.train(TrainSet.from_rows(_rows(X), y), np.random.default_rng(0))
    assert task.predict(m, _rows(X)[0]) in (0, 1)
    assert task.encode(m) == forest_repr(m)

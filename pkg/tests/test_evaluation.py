import itertools
import math
import statistics
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from netmdl import evaluation as ev
from netmdl.data import AttributeMatrix, LabelCatalog, Labelset
from netmdl.netmodel import EdgeSet
from netmdl.queryfn import AdHocNet, make_bfs, make_random, make_top, RankedList
from netmdl.taskmodel import ForestHyper

from oracles import cv_script, kendall_pairs, significance_script
from gen import scripted_instance
from stubs import ConstantTask, ScriptedTask, independent_cost, replay_oracle


def tiny_data(n=30, positives=(3, 7, 11), n_items=10, seed=0):
    rng = np.random.default_rng(seed)
    rows = [{int(j): float(rng.integers(1, 5)) for j in rng.choice(n_items, 3, replace=False)} for _ in range(n)]
    A = AttributeMatrix.from_rows(rows, n_items=n_items)
    labels = LabelCatalog([Labelset("L", frozenset(positives))], n)
    return ev.EvalData(A, labels, A, labels)


def test_config_validation():
    with pytest.raises(ValueError):
        ev.EvalConfig(b=0)
    with pytest.raises(ValueError):
        ev.EvalConfig(K=(50, 25))
    with pytest.raises(ValueError):
        ev.EvalConfig(K=())
    with pytest.raises(ValueError):
        ev.EvalConfig(cost_aggregate="mean")
    assert ev.EvalConfig().b == 20 and ev.EvalConfig().K == (25, 50, 75, 100, 125, 150)


def test_always_correct_constant_cost():
    d = tiny_data()
    task = ConstantTask(1, [5] * 40)
    c = independent_cost([5] * 40)
    cfg = ev.EvalConfig(b=4, K=(2, 5, 9))
    ne = ev.evaluate_node(make_random(30), 3, "L", d.A_train, d.labels_train, cfg, task=task)
    assert ne.kappa == 2
    assert ne.e_node == 4 / c


def test_pick_kappa_example():
    per_k = {25: ev.KStats(2, 100, 0), 50: ev.KStats(8, 200, 0), 75: ev.KStats(6, 300, 0)}
    assert ev.pick_kappa(per_k) == 50
    assert max(Fraction(s.correct, s.median_cost) for s in per_k.values()) == Fraction(8, 200)


def test_pick_kappa_ties_smallest():
    per_k = {10: ev.KStats(1, 100, 0), 20: ev.KStats(2, 200, 0), 30: ev.KStats(0, 50, 0)}
    assert ev.pick_kappa(per_k) == 10


def test_pure_positive_sample_b1():
    n = 12
    A = AttributeMatrix.from_rows([{0: float(v + 1)} for v in range(n)], n_items=1)
    labels = LabelCatalog([Labelset("all", frozenset(range(n)))], n)
    cfg = ev.EvalConfig(b=1, K=(5,))
    ne = ev.evaluate_node(make_random(n), 0, "all", A, labels, cfg)
    assert ne.per_k[5].correct == 1


def test_insufficient_nodes_skip():
    d = tiny_data()
    E = EdgeSet.from_pairs(30, [3, 3], [4, 5])
    cfg = ev.EvalConfig(b=2, K=(2, 3))
    ne = ev.evaluate_node(make_bfs(E), 3, "L", d.A_train, d.labels_train, cfg, task=ConstantTask())
    assert ne.skipped_k == (3,) and ne.kappa == 2
    with pytest.raises(ev.NodeSkipped):
        ev.evaluate_node(make_bfs(E), 7, "L", d.A_train, d.labels_train, cfg, task=ConstantTask())
    res = ev.run_model(ev.Model("bfs", make_bfs(E)), d, cfg, task=ConstantTask())
    assert res.skipped_nodes["L"] == [7, 11]
    assert res.pooled.n_nodes == 1 and res.pooled.n_skipped_nodes == 2


def test_aggregate_arithmetic():
    ne = ev.NodeEval(0, {10: ev.KStats(5, 500, 900)}, 10, 0.01)
    cfg = ev.EvalConfig(b=5, K=(10,))
    e = ev.aggregate([ne], 500, cfg)
    assert e.efficiency == 5 / 1000 == 0.005
    assert ev.aggregate([ne], 1000, cfg).efficiency < e.efficiency
    assert ev.aggregate([ne], 500, ev.EvalConfig(b=5, K=(10,), cost_aggregate="sum")).task_cost_total == 900
    assert ev.aggregate([ne], 500, ev.EvalConfig(b=5, K=(10,), include_rep_cost=False)).efficiency == 0.01
    with pytest.raises(ValueError):
        ev.aggregate([], 10, cfg)


def test_aggregate_vs_sum_and_divide():
    rng = np.random.default_rng(0)
    cfg = ev.EvalConfig(b=7, K=(1, 2, 3))
    evals = []
    for node in range(10):
        per_k = {k: ev.KStats(int(rng.integers(0, 8)), float(rng.integers(50, 900)) / 2, 0) for k in cfg.K}
        kappa = ev.pick_kappa(per_k)
        evals.append(ev.NodeEval(node, per_k, kappa, per_k[kappa].correct / per_k[kappa].median_cost))
    rep = 321
    e = ev.aggregate(evals, rep, cfg)
    correct = sum(x.per_k[x.kappa].correct for x in evals)
    cost = sum(x.per_k[x.kappa].median_cost for x in evals)
    assert e.correct_total == correct
    assert e.efficiency == float(Fraction(correct) / (Fraction(cost) + rep))


def test_pipeline_matches_replay_oracle():
    rng = np.random.default_rng(1)
    for _ in range(25):
        n, positives, b, K, correct, length = scripted_instance(rng)
        data = tiny_data(n, positives)
        cfg = ev.EvalConfig(b=b, K=K)
        rep = make_random(n)
        res = ev.run_model(ev.Model("m", rep), data, cfg, task=ScriptedTask(correct, length))
        tc, cost, eff, kappas = replay_oracle(correct, length, positives, K, b, res.pooled.rep_cost)
        assert res.pooled.correct_total == tc
        assert res.pooled.task_cost_total == cost
        assert res.pooled.efficiency == eff
        assert {ne.node: ne.kappa for ne in res.node_evals["L"]} == kappas
        # pruning to reach can only shrink the representation
        assert res.pooled.rep_cost <= res.rep_cost_full
        if res.reach_size == n:
            assert res.pooled.rep_cost == res.rep_cost_full


def test_efficiency_recomputes_from_fields():
    rng = np.random.default_rng(2)
    n, positives, b, K, correct, length = scripted_instance(rng)
    res = ev.run_model(ev.Model("m", make_random(n)), tiny_data(n, positives), ev.EvalConfig(b=b, K=K),
                       task=ScriptedTask(correct, length))
    for e in list(res.entries.values()) + [res.pooled]:
        assert e.efficiency == e.correct_total / (e.task_cost_total + e.rep_cost)
    for ne in res.node_evals["L"]:
        best = ne.per_k[ne.kappa]
        for k, s in ne.per_k.items():
            assert Fraction(s.correct) / Fraction(s.median_cost) <= Fraction(best.correct) / Fraction(best.median_cost)


def test_cheaper_rep_selected():
    n = 20
    data = tiny_data(n, (1, 2))
    cfg = ev.EvalConfig(b=2, K=(3,))
    cheap = ev.Model("cheap", make_random(n))
    full = EdgeSet.from_pairs(n, *np.nonzero(~np.eye(n, dtype=bool)))
    dear = ev.Model("dear", make_bfs(full))
    table = ev.run_models([dear, cheap], data, cfg, task=ConstantTask())
    r_cheap, r_dear = table.result("cheap"), table.result("dear")
    assert r_cheap.pooled.correct_total == r_dear.pooled.correct_total
    assert r_cheap.pooled.rep_cost < r_dear.pooled.rep_cost
    assert ev.select(table) == "cheap"


def _table_fingerprint(table):
    out = []
    for r in table.results:
        out.append((r.name, r.pooled, tuple(sorted(r.entries.items())), r.rep_cost_full, r.reach_size,
                    tuple((ls, tuple((ne.node, ne.kappa, ne.e_node, tuple(sorted(ne.per_k.items()))) for ne in v))
                          for ls, v in sorted(r.node_evals.items()))))
    return repr(out)


def test_same_seed_same_table_and_jobs_independent():
    data = tiny_data(40, (2, 5, 9, 13, 21, 30))
    cfg = ev.EvalConfig(b=3, K=(4, 8), hyper=ForestHyper(n_trees=3))
    models = [ev.Model("r", make_random(40)), ev.Model("t", make_top("degree_top", RankedList(np.arange(20), 20), 40))]
    a = ev.run_models(models, data, cfg)
    b = ev.run_models(models, data, cfg)
    c = ev.run_models(models, data, cfg, jobs=3)
    assert _table_fingerprint(a) == _table_fingerprint(b) == _table_fingerprint(c)
    other = ev.run_models(models, data, ev.EvalConfig(b=3, K=(4, 8), hyper=ForestHyper(n_trees=3), master_seed=1))
    assert _table_fingerprint(other) != _table_fingerprint(a)


def test_selection_invariant_to_common_cost_scale():
    rng = np.random.default_rng(3)
    for _ in range(50):
        correct = rng.integers(1, 100, 6)
        costs = rng.integers(100, 10_000, 6).astype(float)
        scale = float(rng.integers(2, 50))
        a = int(np.argmax([ev.efficiency(c, x, 0) for c, x in zip(correct, costs)]))
        b = int(np.argmax([ev.efficiency(c, x * scale, 0) for c, x in zip(correct, costs)]))
        assert a == b


# -- significance -----------------------------------------------------------------


def test_significance_all_equal():
    s = ev.significance([1.0] * 6, 2)
    assert s.score == 0.0 and not s.significant


def test_significance_outlier_example():
    e = [1.0, 1.1, 0.9, 1.05, 50.0]
    s = ev.significance(e, 4, 1.0)
    assert s.significant
    assert abs(s.score - significance_script(e, 4)) <= 1e-12


def test_significance_under_performer_not_flagged():
    e = [1.0, 1.1, 0.9, 1.05, 0.0001, 1.02]
    assert ev.significance_score(e, 4) > 1.0
    assert not ev.significance(e, 4, 1.0).significant


def test_significance_needs_four():
    with pytest.raises(ValueError):
        ev.significance([1.0, 2.0, 3.0], 0)


def test_significance_permutation_invariant():
    rng = np.random.default_rng(4)
    for _ in range(30):
        e = rng.random(8).tolist()
        base = ev.significance_score(e, 0)
        rest = e[1:]
        rng.shuffle(rest)
        assert abs(ev.significance_score([e[0]] + rest, 0) - base) <= 1e-15


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.0, 10.0), min_size=4, max_size=12), st.data())
def test_significance_vs_script(e, data):
    r = data.draw(st.integers(0, len(e) - 1))
    assert abs(ev.significance_score(e, r) - significance_script(e, r)) <= 1e-12


def test_significance_monotone_above_median():
    rng = np.random.default_rng(5)
    for _ in range(30):
        cohort = (1 + 0.1 * rng.random(7)).tolist()
        med = statistics.median(cohort)
        prev = -math.inf
        for bump in (0.01, 0.1, 0.5, 1.0, 5.0):
            score = ev.significance_score(cohort + [med + bump], 7)
            assert score > prev
            prev = score


# -- kendall / cv ---------------------------------------------------------------------


def test_kendall_identity_reverse():
    a = list(range(9))
    assert ev.kendall_tau(a, a)[0] == 1.0
    assert ev.kendall_tau(a, a[::-1])[0] == -1.0
    with pytest.raises(ValueError):
        ev.kendall_tau([1, 2], [1, 2, 3])


def test_kendall_all_small_permutations():
    for n in range(2, 7):
        base = list(range(n))
        for perm in itertools.permutations(base):
            assert abs(ev.kendall_tau(base, perm)[0] - kendall_pairs(base, perm)) <= 1e-12


def test_kendall_random_and_scipy():
    scipy_stats = pytest.importorskip("scipy.stats")
    rng = np.random.default_rng(6)
    for _ in range(200):
        n = int(rng.integers(2, 13))
        a, b = rng.permutation(n), rng.permutation(n)
        tau, p = ev.kendall_tau(a, b)
        assert abs(tau - kendall_pairs(a.tolist(), b.tolist())) <= 1e-12
        if n > 2:
            # scipy's asymptotic variance divides by zero at n=2
            ref = scipy_stats.kendalltau(a, b, method="asymptotic")
            assert abs(tau - ref.statistic) <= 1e-12
            assert abs(p - ref.pvalue) <= 1e-9
    # ties
    for _ in range(100):
        n = int(rng.integers(3, 15))
        a, b = rng.integers(0, 4, n), rng.integers(0, 4, n)
        tau, p = ev.kendall_tau(a, b)
        ref = scipy_stats.kendalltau(a, b, method="asymptotic")
        if math.isnan(ref.statistic):
            assert math.isnan(tau)
            continue
        assert abs(tau - ref.statistic) <= 1e-12
        assert abs(tau - kendall_pairs(a.tolist(), b.tolist())) <= 1e-12
        assert abs(p - ref.pvalue) <= 1e-9


def test_cv():
    assert ev.coefficient_of_variation([3.0, 3.0, 3.0]) == 0.0
    assert abs(ev.coefficient_of_variation([1, 3]) - math.sqrt(2) / 2) <= 1e-15
    rng = np.random.default_rng(7)
    for _ in range(100):
        v = (rng.random(int(rng.integers(2, 30))) * 10 + 0.1).tolist()
        assert abs(ev.coefficient_of_variation(v) - cv_script(v)) <= 1e-12
    with pytest.raises(ZeroDivisionError):
        ev.coefficient_of_variation([1.0, -1.0])


# -- rewiring ---------------------------------------------------------------------------


def _random_graph(rng, n, p):
    s, d = np.nonzero(rng.random((n, n)) < p)
    return EdgeSet.from_pairs(n, s, d)


def test_rewire_identity_at_zero():
    rng = np.random.default_rng(8)
    E = _random_graph(rng, 30, 0.2)
    assert ev.rewire_noise(E, 0.0, rng) == E
    with pytest.raises(ValueError):
        ev.rewire_noise(E, 1.5, rng)


def test_rewire_preserves_out_degree_1000():
    rng = np.random.default_rng(9)
    for _ in range(1000):
        n = int(rng.integers(2, 12))
        E = _random_graph(rng, n, rng.random())
        p = float(rng.random())
        R = ev.rewire_noise(E, p, rng)
        assert R.out_degree().tolist() == E.out_degree().tolist()
        assert all(i not in R.neighbors(i).tolist() for i in range(n))


def test_rewire_binomial_retention():
    rng = np.random.default_rng(10)
    n = 200
    src = np.repeat(np.arange(n), 5)
    dst = np.array([rng.choice(np.delete(np.arange(n), i), 5, replace=False) for i in range(n)]).ravel()
    E = EdgeSet.from_pairs(n, src, dst)
    assert E.n_edges == 1000
    R = ev.rewire_noise(E, 0.5, rng)
    kept = len(E.pairs() & R.pairs())
    # a rewired edge can land back on an old target only if that target was vacated earlier; allow for it
    sigma = math.sqrt(1000 * 0.25)
    assert abs(kept - 500) <= 3 * sigma + 10


def test_rewire_complete_graph_stuck():
    n = 5
    E = EdgeSet.from_pairs(n, *np.nonzero(~np.eye(n, dtype=bool)))
    stats = {}
    R = ev.rewire_noise(E, 1.0, np.random.default_rng(0), stats)
    assert R == E and stats["stuck"] == 20 and stats["rewired"] == 0


def test_rewire_adhoc():
    rng = np.random.default_rng(11)
    n, ell, m = 400, 40, 8
    pool = np.arange(ell)
    lists = [rng.choice(np.delete(pool, np.flatnonzero(pool == v)), m, replace=False) for v in range(n)]
    net = AdHocNet(EdgeSet.from_lists(lists), pool, m)
    assert ev.rewire_adhoc(net, 0.0, rng).edges == net.edges
    fracs = []
    for seed in range(5):
        R = ev.rewire_adhoc(net, 1.0, np.random.default_rng(seed))
        assert (R.edges.out_degree() == m).all()
        fracs.append(np.isin(R.edges.indices, pool).mean())
    assert abs(np.mean(fracs) - ell / n) < 0.02


def test_rewire_rep_kinds():
    from netmdl.queryfn import CommunityMap, QueryRep

    rng = np.random.default_rng(12)
    ranked = make_top("degree_top", RankedList(np.arange(10), 10), 50)
    r = ev.rewire_rep(ranked, 1.0, rng)
    assert len(set(r.payload.ids.tolist())) == 10 and r.payload.ell == 10
    cmap = QueryRep("cluster", CommunityMap(np.arange(50) % 3), 50)
    moved = ev.rewire_rep(cmap, 0.5, rng)
    assert set(moved.payload.assignment.tolist()) <= {0, 1, 2}
    assert ev.rewire_rep(make_random(50), 0.7, rng).payload.ids.tolist() == list(range(50))
    assert ev.rewire_rep(ranked, 0.0, rng) is ranked


def test_noise_sweep_p0_equals_baseline():
    data = tiny_data(30, (3, 7, 11, 19))
    cfg = ev.EvalConfig(b=2, K=(3, 6), hyper=ForestHyper(n_trees=3))
    rng = np.random.default_rng(13)
    E = _random_graph(rng, 30, 0.3)
    models = [ev.Model("bfs", make_bfs(E)), ev.Model("random", make_random(30)),
              ev.Model("top", make_top("degree_top", RankedList(np.arange(12), 12), 30)),
              ev.Model("bfs2", make_bfs(_random_graph(rng, 30, 0.1)))]
    base = ev.run_models(models, data, cfg)
    rows = ev.noise_sweep(models, ["bfs"], [0.0, 0.5], data, cfg, base)
    assert rows[0].efficiency == base.result("bfs").pooled.efficiency
    sig = ev.significance(base.efficiencies(), 0, cfg.lam)
    assert rows[0].score == sig.score
    assert [r.p for r in rows] == [0.0, 0.5]
    with pytest.raises(ValueError):
        ev.noise_sweep(models, ["bfs"], [0.5], data, cfg, base)

"""Efficiency evaluation, model selection, significance, rank stability and noise sweeps."""

from __future__ import annotations

import math
import multiprocessing as mp
import statistics
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import mdl
from .data import LabelCatalog
from .netmodel import EdgeSet
from .queryfn import (
    AdHocNet,
    CommunityMap,
    InsufficientNodes,
    RankedList,
    ReachLog,
    bfs_levels,
    prune_to_reach,
    query,
)
from .taskmodel import ForestHyper, ForestTask, TrainSet


@dataclass(frozen=True)
class EvalConfig:
    b: int = 20
    K: tuple = (25, 50, 75, 100, 125, 150)
    master_seed: int = 0
    hyper: ForestHyper = ForestHyper()
    lam: float = 1.0
    include_rep_cost: bool = True
    cost_aggregate: str = "median"  # per-node task cost at kappa: "median" or "sum" over the b forests
    delta_encode: bool = False

    def __post_init__(self):
        K = tuple(int(k) for k in self.K)
        object.__setattr__(self, "K", K)
        if self.b < 1:
            raise ValueError("b must be >= 1")
        if not K or any(k < 1 for k in K) or any(a >= b for a, b in zip(K, K[1:])):
            raise ValueError("K must be a nonempty strictly ascending list of positive sizes")
        if self.cost_aggregate not in ("median", "sum"):
            raise ValueError("cost_aggregate must be 'median' or 'sum'")

    def to_json(self):
        d = asdict(self)
        d["K"] = list(self.K)
        return d


def stream(*key):
    """Independent generator keyed by a tuple of ints and strings."""
    words = [zlib.crc32(k.encode()) if isinstance(k, str) else int(k) for k in key]
    return np.random.default_rng(np.random.SeedSequence(words))


@dataclass(frozen=True)
class KStats:
    correct: int
    median_cost: float
    total_cost: int
    costs: tuple = ()


@dataclass(frozen=True)
class NodeEval:
    node: int
    per_k: dict
    kappa: int
    e_node: float
    skipped_k: tuple = ()

    def cost_at(self, k, how="median"):
        s = self.per_k[k]
        return s.median_cost if how == "median" else s.total_cost


class NodeSkipped(Exception):
    """Every sample size was skipped for a node."""


def pick_kappa(per_k):
    """Sample size with the largest correct/median-cost ratio; ties go to the smallest k."""
    best_k, best = None, None
    for k in sorted(per_k):
        s = per_k[k]
        ratio = Fraction(s.correct) / Fraction(s.median_cost)
        if best is None or ratio > best:
            best_k, best = k, ratio
    return best_k


def evaluate_node(rep, i, labelset, A_train, labels, cfg, log=None, *, a_test=None, task=None,
                  model_name="model", cache=None):
    """Train ``b`` task models per ``k`` on query samples around ``i`` and pick the most efficient ``k``.

    ``labels`` is the training :class:`LabelCatalog` or a 0/1 vector for
    ``labelset``; ``i`` is treated as a positive node. ``a_test`` is the
    attribute vector used to test (defaults to ``A_train``'s row ``i``).
    """
    task = task or ForestTask(cfg.hyper)
    y = labels.vector(labelset) if isinstance(labels, LabelCatalog) else np.asarray(labels)
    if a_test is None:
        a_test = A_train.row(i)
    if cache is None:
        cache = {}
    if rep.kind == "bfs" and ("bfs", i) not in cache:
        levels = bfs_levels(rep.payload, i, max(cfg.K))
        total = sum(len(lv) for lv in levels)
        cache[("bfs", i)] = (total, total < max(cfg.K), levels)
    per_k = {}
    skipped = []
    for k in cfg.K:
        correct = 0
        costs = []
        try:
            for r in range(cfg.b):
                rng = stream(cfg.master_seed, model_name, labelset, i, k, r)
                sample = query(rep, i, k, rng, log, cache)
                model = task.train(TrainSet.from_nodes(A_train, sample.members, y), rng)
                correct += int(task.predict(model, a_test) == 1)
                costs.append(mdl.cost(task.encode(model)))
        except InsufficientNodes:
            skipped.append(k)
            continue
        per_k[k] = KStats(correct, statistics.median(costs), sum(costs), tuple(costs))
    if not per_k:
        raise NodeSkipped(f"node {i}: every k skipped")
    kappa = pick_kappa(per_k)
    s = per_k[kappa]
    return NodeEval(int(i), per_k, kappa, s.correct / s.median_cost, tuple(skipped))


@dataclass(frozen=True)
class Entry:
    correct_total: int
    task_cost_total: float
    rep_cost: int
    efficiency: float
    n_nodes: int
    n_skipped_nodes: int = 0
    mean_kappa: float = 0.0

    @property
    def total_cost(self):
        return self.task_cost_total + self.rep_cost

    @property
    def rep_cost_ratio(self):
        return self.rep_cost / self.total_cost if self.total_cost else 0.0


def efficiency(correct, task_cost, rep_cost, include_rep_cost=True):
    denom = task_cost + rep_cost if include_rep_cost else task_cost
    if denom <= 0:
        raise ZeroDivisionError("total cost must be positive")
    return correct / denom


def aggregate(node_evals, rep_cost_pruned, cfg, n_skipped=0):
    """Sum correct predictions and per-node task costs at each node's kappa."""
    node_evals = list(node_evals)
    if not node_evals:
        raise ValueError("no node evaluations to aggregate")
    correct = 0
    task_cost = 0
    for ne in node_evals:
        correct += ne.per_k[ne.kappa].correct
        task_cost += ne.cost_at(ne.kappa, cfg.cost_aggregate)
    eff = efficiency(correct, task_cost, rep_cost_pruned, cfg.include_rep_cost)
    mean_kappa = sum(ne.kappa for ne in node_evals) / len(node_evals)
    return Entry(correct, task_cost, int(rep_cost_pruned), eff, len(node_evals), n_skipped, mean_kappa)


@dataclass(frozen=True)
class Model:
    name: str
    rep: object  # QueryRep


@dataclass(frozen=True)
class EvalData:
    """Training attributes/labels to sample from, plus the partition whose positives are tested."""

    A_train: object
    labels_train: LabelCatalog
    A_eval: object
    labels_eval: LabelCatalog


@dataclass
class ModelResult:
    name: str
    kind: str
    entries: dict  # labelset -> Entry
    pooled: Entry
    rep_cost_full: int
    reach_size: int
    node_evals: dict = field(default_factory=dict, repr=False)  # labelset -> list[NodeEval]
    skipped_nodes: dict = field(default_factory=dict)  # labelset -> list of node ids


_WORK = {}


def _eval_chunk(args):
    labelset, nodes = args
    w = _WORK
    return _run_nodes(w["rep"], labelset, nodes, w["data"], w["cfg"], w["task"], w["name"])


def _run_nodes(rep, labelset, nodes, data, cfg, task, name):
    y = data.labels_train.vector(labelset)
    log = ReachLog(rep.n_nodes)
    evals, skipped = [], []
    for i in nodes:
        try:
            evals.append(
                evaluate_node(rep, i, labelset, data.A_train, y, cfg, log,
                              a_test=data.A_eval.row(i), task=task, model_name=name)
            )
        except NodeSkipped:
            skipped.append(int(i))
    return evals, log.mask, skipped


def _chunks(nodes, size):
    return [nodes[s:s + size] for s in range(0, len(nodes), size)]


def run_model(model, data, cfg, jobs=1, task=None):
    """Evaluate every positive test node of every labelset; prune and cost the representation.

    Per-labelset entries use the representation pruned to that labelset's
    reach; the pooled entry sums correct and task costs across labelsets
    and charges the representation once, pruned to the union reach.
    """
    task = task or ForestTask(cfg.hyper)
    rep = model.rep
    work = []
    for ls in data.labels_eval.labelsets:
        nodes = sorted(ls.positives)
        if not nodes:
            continue
        per_chunk = max(1, math.ceil(len(nodes) / (4 * jobs))) if jobs > 1 else len(nodes)
        work.extend((ls.name, c) for c in _chunks(nodes, per_chunk))
    if jobs > 1 and len(work) > 1:
        _WORK.update(rep=rep, data=data, cfg=cfg, task=task, name=model.name)
        try:
            with ProcessPoolExecutor(jobs, mp_context=mp.get_context("fork")) as pool:
                results = list(pool.map(_eval_chunk, work))
        finally:
            _WORK.clear()
    else:
        results = [_run_nodes(rep, ls, nodes, data, cfg, task, model.name) for ls, nodes in work]

    by_ls = {}
    for (ls, _), (evals, mask, skipped) in zip(work, results):
        cur = by_ls.setdefault(ls, ([], np.zeros(rep.n_nodes, dtype=bool), []))
        cur[0].extend(evals)
        cur[1][:] |= mask
        cur[2].extend(skipped)

    union = ReachLog(rep.n_nodes)
    entries, node_evals, skipped_nodes = {}, {}, {}
    all_evals = []
    n_skipped = 0
    for ls, (evals, mask, skipped) in by_ls.items():
        union.mask |= mask
        node_evals[ls] = evals
        skipped_nodes[ls] = skipped
        n_skipped += len(skipped)
        if evals:
            log = ReachLog(rep.n_nodes, mask.copy())
            rc = mdl.cost(mdl.encode_query_rep(prune_to_reach(rep, log), cfg.delta_encode))
            entries[ls] = aggregate(evals, rc, cfg, len(skipped))
            all_evals.extend(evals)
    rep_cost = mdl.cost(mdl.encode_query_rep(prune_to_reach(rep, union), cfg.delta_encode))
    if all_evals:
        pooled = aggregate(all_evals, rep_cost, cfg, n_skipped)
    else:
        pooled = Entry(0, 0, rep_cost, 0.0, 0, n_skipped, 0.0)
    full = mdl.cost(mdl.encode_query_rep(rep, cfg.delta_encode))
    return ModelResult(model.name, rep.kind, entries, pooled, full, len(union), node_evals, skipped_nodes)


@dataclass
class EfficiencyTable:
    results: list  # ModelResult in roster order
    cfg: EvalConfig
    partition: str = ""

    @property
    def models(self):
        return [r.name for r in self.results]

    def efficiencies(self):
        return [r.pooled.efficiency for r in self.results]

    def result(self, name):
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)


def run_models(models, data, cfg, jobs=1, task=None, partition=""):
    return EfficiencyTable([run_model(m, data, cfg, jobs, task) for m in models], cfg, partition)


def select(table):
    """Name of the model with the highest pooled efficiency (first in roster order on ties)."""
    effs = table.efficiencies()
    return table.models[int(np.argmax(effs))]


@dataclass(frozen=True)
class SignificanceResult:
    model: object
    score: float
    significant: bool


def _pairwise_gaps(values):
    v = np.asarray(values, dtype=np.float64)
    iu, ju = np.triu_indices(v.size, k=1)
    return np.abs(v[iu] - v[ju])


def significance_score(efficiencies, r):
    """Median gap of model ``r`` to the others, centred on and scaled by the others' pairwise gaps.

    Pairwise gaps are taken over unordered pairs of distinct models other
    than ``r``; the IQR uses linear-interpolation quartiles. A zero IQR
    yields a score of 0.
    """
    e = np.asarray(efficiencies, dtype=np.float64)
    if e.size < 4:
        raise ValueError("significance needs at least 4 models")
    others = np.delete(e, r)
    own = float(np.median(np.abs(e[r] - others)))
    gaps = _pairwise_gaps(others)
    q1, med, q3 = np.percentile(gaps, [25, 50, 75])
    iqr = float(q3 - q1)
    if iqr == 0.0:
        return 0.0
    return (own - float(med)) / iqr


def significance(efficiencies, r, lam=1.0, model=None):
    """Flag model ``r`` when its score reaches ``lam`` and it beats the median of the others."""
    e = np.asarray(efficiencies, dtype=np.float64)
    score = significance_score(e, r)
    above = e[r] > float(np.median(np.delete(e, r)))
    return SignificanceResult(r if model is None else model, score, bool(score >= lam and above))


def significance_all(table, lam):
    effs = table.efficiencies()
    if len(effs) < 4:
        return [SignificanceResult(name, float("nan"), False) for name in table.models]
    return [significance(effs, r, lam, name) for r, name in enumerate(table.models)]


def kendall_tau(a, b):
    """Kendall tau-b with ties, and a two-sided p-value from the normal approximation."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("rankings must have equal length")
    n = a.size
    if n < 2:
        raise ValueError("need at least two items")
    iu, ju = np.triu_indices(n, k=1)
    sa = np.sign(a[iu] - a[ju]).astype(np.int64)
    sb = np.sign(b[iu] - b[ju]).astype(np.int64)
    prod = sa * sb
    s = int(prod.sum())
    n0 = n * (n - 1) // 2
    n1 = int((sa == 0).sum())
    n2 = int((sb == 0).sum())
    denom = math.sqrt((n0 - n1) * (n0 - n2))
    if denom == 0:
        return float("nan"), float("nan")
    tau = s / denom

    def tie_terms(x):
        _, t = np.unique(x, return_counts=True)
        t = t.astype(np.int64)
        return (int((t * (t - 1)).sum()), int((t * (t - 1) * (t - 2)).sum()), int((t * (t - 1) * (2 * t + 5)).sum()))

    a1, a2, a3 = tie_terms(a)
    b1, b2, b3 = tie_terms(b)
    var = (n * (n - 1) * (2 * n + 5) - a3 - b3) / 18.0
    var += a1 * b1 / (2.0 * n * (n - 1))
    var += a2 * b2 / (9.0 * n * (n - 1) * (n - 2)) if n > 2 else 0.0
    if var <= 0:
        return tau, float("nan")
    z = s / math.sqrt(var)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return tau, min(1.0, p)


def coefficient_of_variation(values):
    """Sample standard deviation over mean."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise ValueError("need at least two values")
    mu = float(v.mean())
    if mu == 0.0:
        raise ZeroDivisionError("mean is zero")
    return float(v.std(ddof=1)) / mu


def _draw_outside(rng, n, forbidden):
    if len(forbidden) * 2 < n:
        while True:
            j = int(rng.integers(n))
            if j not in forbidden:
                return j
    allowed = np.setdiff1d(np.arange(n), np.fromiter(forbidden, dtype=np.int64))
    return int(allowed[int(rng.integers(allowed.size))])


def _rewire_lists(edges, p, rng, stats):
    n = edges.n_nodes
    lists = []
    stuck = rewired = 0
    for i in range(n):
        old = edges.neighbors(i).tolist()
        current = set(old)
        new = list(old)
        for t, target in enumerate(old):
            if rng.random() >= p:
                continue
            forbidden = current | {i}
            if len(forbidden) >= n:
                stuck += 1
                continue
            j = _draw_outside(rng, n, forbidden)
            current.discard(target)
            current.add(j)
            new[t] = j
            rewired += 1
        lists.append(sorted(new))
    if stats is not None:
        stats["stuck"] = stats.get("stuck", 0) + stuck
        stats["rewired"] = stats.get("rewired", 0) + rewired
    return lists


def rewire_noise(edges, p, rng, stats=None):
    """Replace each out-edge, with probability ``p``, by an edge to a uniform random node.

    New targets avoid self-loops and the node's current out-list, so every
    out-degree is preserved. A node already pointing at every other node
    cannot rewire; such attempts are counted in ``stats["stuck"]``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if p == 0.0:
        return edges
    lists = _rewire_lists(edges, p, rng, stats)
    return EdgeSet.from_lists(lists, directed=True)


def rewire_adhoc(net, p, rng, stats=None):
    """Remap each exemplar edge with probability ``p`` to a uniform random node (possibly outside the pool)."""
    return AdHocNet(rewire_noise(net.edges, p, rng, stats), net.pool, net.m)


def _rewire_ranked(ranked, p, n, rng):
    ids = ranked.ids.tolist()
    current = set(ids)
    for t, v in enumerate(list(ids)):
        if rng.random() >= p or len(current) >= n:
            continue
        j = _draw_outside(rng, n, current)
        current.discard(v)
        current.add(j)
        ids[t] = j
    return RankedList(ids, ranked.ell)


def _rewire_partition(cmap, p, rng):
    a = cmap.assignment.copy()
    labels = np.unique(a[a >= 0])
    for v in range(a.size):
        if rng.random() < p and labels.size > 1:
            a[v] = labels[int(rng.integers(labels.size))]
    return CommunityMap(a)


def rewire_rep(rep, p, rng, stats=None):
    """Noise model for any representation kind.

    Graphs and ad-hoc nets use out-degree-preserving rewiring; ranked lists
    replace each entry with probability ``p`` by a random node not already
    listed; partitions move each node with probability ``p`` to a random
    existing community; the random pool is left unchanged.
    """
    if p == 0.0:
        return rep
    pl = rep.payload
    if isinstance(pl, EdgeSet):
        new = rewire_noise(pl, p, rng, stats)
    elif isinstance(pl, AdHocNet):
        new = rewire_adhoc(pl, p, rng, stats)
    elif isinstance(pl, RankedList):
        new = _rewire_ranked(pl, p, rep.n_nodes, rng)
    elif isinstance(pl, CommunityMap):
        new = _rewire_partition(pl, p, rng)
    else:
        return rep
    return replace(rep, payload=new)


@dataclass(frozen=True)
class SweepRow:
    model: str
    p: float
    correct_total: int
    task_cost_total: float
    rep_cost: int
    efficiency: float
    score: float
    significant: bool


def noise_sweep(models, targets, p_grid, data, cfg, baseline, jobs=1, task=None):
    """Rewire one target model at a time over ``p_grid`` and re-score it against the untouched cohort."""
    p_grid = [float(p) for p in p_grid]
    if not p_grid or p_grid[0] != 0.0 or any(a >= b for a, b in zip(p_grid, p_grid[1:])):
        raise ValueError("p_grid must be ascending and start at 0")
    names = [m.name for m in models]
    base_effs = baseline.efficiencies()
    rows = []
    for name in targets:
        r = names.index(name)
        model = models[r]
        for idx, p in enumerate(p_grid):
            if p == 0.0:
                res = baseline.result(name)
            else:
                rng = stream(cfg.master_seed, "noise", name, idx)
                res = run_model(Model(name, rewire_rep(model.rep, p, rng)), data, cfg, jobs, task)
            effs = list(base_effs)
            effs[r] = res.pooled.efficiency
            if len(effs) >= 4:
                sig = significance(effs, r, cfg.lam, name)
                score, flag = sig.score, sig.significant
            else:
                score, flag = float("nan"), False
            e = res.pooled
            rows.append(SweepRow(name, p, e.correct_total, e.task_cost_total, e.rep_cost, e.efficiency, score, flag))
    return rows

"""Command-line driver: ingest data, evaluate model rosters, select, run noise sweeps, report.

Every command reads one JSON run config (all fields optional) plus flag
overrides. Exit codes: 0 success, 2 config/validation error, 3 runtime
evaluation error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, mdl
from . import evaluation as ev
from . import queryfn as q
from ._kernels import BACKEND
from .data import (
    ActivityEvent,
    DataError,
    LabelCatalog,
    SyntheticConfig,
    derive_labels,
    events_to_matrix,
    generate_synthetic,
    load_events,
    load_label_rules,
    temporal_split,
    write_events,
)
from .netmodel import EdgeSet, build_knn, build_threshold, load_edges, write_edges
from .taskmodel import ForestHyper

log = logging.getLogger("netmdl")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
PARTITIONS = ("validation", "training", "testing")
NET_KINDS = ("bfs", "cluster", "degree_top", "degree_net")
FREE_KINDS = ("activity_top", "activity_net", "random")
SIM_NETWORKS = ("knn_dense", "knn_sparse", "th_dense", "th_sparse")
DEFAULT_DENSITY = 0.01
SPARSE_FACTOR = 0.25  # sparse rho relative to dense when no declared network sets the scale
SPARSE_FACTOR_DECLARED = 0.5
DEFAULT_NOISE_GRID = (0.0, 0.25, 0.5, 1.0)


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------- config


@dataclass
class RunConfig:
    events: str | None = None
    events_format: str = "tsv"
    split_by: str = "count"
    fractions: tuple = (1 / 3, 1 / 3, 1 / 3)
    label_rules: str | None = None
    social_edges: str | None = None
    synthetic: dict | None = None
    bundle: str = "bundle"
    output: str = "out"
    rho_dense: int | None = None
    rho_sparse: int | None = None
    roster: list | None = None  # model names "kind" or "kind@network"; None -> full grid
    ell: int | None = None
    m: int = q.DEFAULT_M
    b: int = 20
    K: tuple = (25, 50, 75, 100, 125, 150)
    master_seed: int = 0
    hyper: dict = field(default_factory=dict)
    lam: float = 1.0
    include_rep_cost: bool = True
    cost_aggregate: str = "median"
    delta_encode: bool = False
    noise_grid: tuple = DEFAULT_NOISE_GRID
    jobs: int = 1

    @classmethod
    def from_json(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("run config must be a JSON object")
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**doc)

    def eval_config(self):
        try:
            return ev.EvalConfig(
                b=int(self.b),
                K=tuple(self.K),
                master_seed=int(self.master_seed),
                hyper=ForestHyper.from_json(self.hyper or {}),
                lam=float(self.lam),
                include_rep_cost=bool(self.include_rep_cost),
                cost_aggregate=self.cost_aggregate,
                delta_encode=bool(self.delta_encode),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc


def _parse_list(text, conv):
    try:
        return tuple(conv(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"cannot parse list {text!r}") from None


def load_config(args):
    doc = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    cfg = RunConfig.from_json(doc)
    over = {}
    if getattr(args, "seed", None) is not None:
        over["master_seed"] = args.seed
    if getattr(args, "b", None) is not None:
        over["b"] = args.b
    if getattr(args, "k_grid", None):
        over["K"] = _parse_list(args.k_grid, int)
    if getattr(args, "rho_dense", None) is not None:
        over["rho_dense"] = args.rho_dense
    if getattr(args, "rho_sparse", None) is not None:
        over["rho_sparse"] = args.rho_sparse
    if getattr(args, "lam", None) is not None:
        over["lam"] = args.lam
    if getattr(args, "noise_grid", None):
        over["noise_grid"] = _parse_list(args.noise_grid, float)
    if getattr(args, "jobs", None) is not None:
        over["jobs"] = args.jobs
    if getattr(args, "bundle", None):
        over["bundle"] = args.bundle
    if getattr(args, "out", None):
        over["output"] = args.out
    if getattr(args, "roster", None):
        over["roster"] = [x.strip() for x in args.roster.split(",") if x.strip()]
    cfg = replace(cfg, **over)
    if cfg.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    cfg.eval_config()  # validate early
    return cfg


# ---------------------------------------------------------------- bundle


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def _map_edges(path, user_ids):
    """Read a raw-token edge list and map endpoints through the user table; unknown users are dropped."""
    src, dst, dropped = [], [], 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise DataError(f"{path}: line {lineno}: expected 'src dst'")
            a, b = user_ids.get(parts[0]), user_ids.get(parts[1])
            if a is None or b is None:
                dropped += 1
                continue
            src.append(a)
            dst.append(b)
    edges = EdgeSet.from_pairs(len(user_ids), src, dst, directed=True)
    return edges, dropped


def cmd_ingest(cfg):
    """Load or generate data, split, derive labels and write a dataset bundle."""
    out = Path(cfg.bundle)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"tool": "netmdl", "version": __version__, "fractions": list(cfg.fractions), "split_by": cfg.split_by}
    networks = {}
    if cfg.synthetic is not None:
        try:
            scfg = SyntheticConfig.from_json(dict(cfg.synthetic))
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        syn = generate_synthetic(scfg)
        n_nodes, n_items = scfg.n_nodes, scfg.n_items
        split = syn.split
        labels = {p: syn.labels for p in PARTITIONS}
        networks["truth"] = syn.edges
        manifest["source"] = {"synthetic": scfg.to_json()}
        manifest["seeds"] = {"synthetic": scfg.seed}
        np.savetxt(out / "communities.txt", syn.communities, fmt="%d")
    elif cfg.events is not None:
        if cfg.label_rules is None:
            raise ConfigError("label_rules is required with an events file")
        path = Path(cfg.events)
        if not path.exists():
            raise DataError(f"events file not found: {path}")
        elog = load_events(path, cfg.events_format)
        if not len(elog):
            raise DataError(f"{path}: no events")
        n_nodes, n_items = elog.n_nodes, elog.n_items
        split = temporal_split(elog.events, cfg.fractions, cfg.split_by, n_nodes, n_items)
        rules = load_label_rules(cfg.label_rules)
        labels = {p: derive_labels(split.partition(p), rules) for p in PARTITIONS}
        manifest["source"] = {"events": str(path), "events_sha256": _sha256(path), "label_rules": str(cfg.label_rules)}
        manifest["seeds"] = {}
        (out / "users.txt").write_text("".join(f"{u}\n" for u in elog.users), encoding="utf-8")
        (out / "items.txt").write_text("".join(f"{i}\n" for i in elog.items), encoding="utf-8")
        if cfg.social_edges:
            if not Path(cfg.social_edges).exists():
                raise DataError(f"edge file not found: {cfg.social_edges}")
            edges, dropped = _map_edges(cfg.social_edges, {u: k for k, u in enumerate(elog.users)})
            networks["social"] = edges
            manifest["social_dropped_edges"] = dropped
            manifest["social_dropped_self_loops"] = edges.dropped_self_loops
    else:
        raise ConfigError("config needs either 'events' or 'synthetic'")

    manifest["n_nodes"], manifest["n_items"] = int(n_nodes), int(n_items)
    manifest["boundaries"] = list(split.boundaries)
    manifest["counts"] = dict(zip(PARTITIONS, split.counts))
    for p, events in zip(PARTITIONS, split.events):
        write_events(events, out / f"events_{p}.tsv")
    _dump_json({p: labels[p].to_json() for p in PARTITIONS}, out / "labels.json")
    for name, edges in networks.items():
        write_edges(edges, out / f"{name}.edges")
    manifest["networks"] = {name: {"directed": e.directed} for name, e in networks.items()}
    files = sorted(p.name for p in out.iterdir() if p.name != "manifest.json" and p.is_file())
    manifest["files"] = {f: _sha256(out / f) for f in files}
    manifest["digest"] = hashlib.sha256(json.dumps(manifest["files"], sort_keys=True).encode()).hexdigest()
    _dump_json(manifest, out / "manifest.json")
    print(f"bundle {out}: {n_nodes} nodes, {n_items} items, events {split.counts}, digest {manifest['digest'][:12]}")
    for ls in labels["validation"].labelsets:
        print(f"  labelset {ls.name}: {len(ls.positives)} positives (validation)")
    return manifest


@dataclass
class Bundle:
    path: Path
    manifest: dict
    matrices: dict
    labels: dict
    networks: dict

    @property
    def n_nodes(self):
        return self.manifest["n_nodes"]


def _load_partition(path, n_nodes, n_items):
    if path.stat().st_size == 0:
        return events_to_matrix([], n_nodes, n_items)
    elog = load_events(path, "tsv")
    # bundle files carry dense ids already; undo the first-appearance remap
    users = [int(u) for u in elog.users]
    items = [int(i) for i in elog.items]
    events = [ActivityEvent(users[e.user], items[e.item], e.value, e.timestamp) for e in elog.events]
    return events_to_matrix(events, n_nodes, n_items)


def load_bundle(path):
    path = Path(path)
    mpath = path / "manifest.json"
    if not mpath.exists():
        raise DataError(f"no dataset bundle at {path} (missing manifest.json)")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    for f, digest in manifest["files"].items():
        if not (path / f).exists() or _sha256(path / f) != digest:
            raise DataError(f"bundle file {f} is missing or does not match its manifest digest")
    n, n_items = manifest["n_nodes"], manifest["n_items"]
    matrices = {p: _load_partition(path / f"events_{p}.tsv", n, n_items) for p in PARTITIONS}
    ldoc = json.loads((path / "labels.json").read_text(encoding="utf-8"))
    labels = {p: LabelCatalog.from_json(ldoc[p]) for p in PARTITIONS}
    networks = {}
    for name, meta in manifest.get("networks", {}).items():
        e = load_edges(path / f"{name}.edges", n)
        networks[name] = EdgeSet(e.n_nodes, e.indptr, e.indices, meta.get("directed", True))
    return Bundle(path, manifest, matrices, labels, networks)


# ---------------------------------------------------------------- roster


def edge_count(edges):
    """|E| of a declared network: unordered pairs if undirected, else directed edges."""
    return edges.n_edges if edges.directed else edges.n_edges // 2


def resolve_rho(cfg, bundle):
    n = bundle.n_nodes
    declared = next((bundle.networks[k] for k in ("social", "truth") if k in bundle.networks), None)
    if declared is not None:
        dense = edge_count(declared)
        sparse = int(dense * SPARSE_FACTOR_DECLARED)
    else:
        dense = int(round(DEFAULT_DENSITY * n * (n - 1)))
        sparse = int(round(DEFAULT_DENSITY * SPARSE_FACTOR * n * (n - 1)))
    dense = int(cfg.rho_dense) if cfg.rho_dense is not None else dense
    sparse = int(cfg.rho_sparse) if cfg.rho_sparse is not None else sparse
    return dense, sparse


def default_roster(bundle):
    nets = list(SIM_NETWORKS) + sorted(bundle.networks)
    return [f"{k}@{net}" for net in nets for k in NET_KINDS] + list(FREE_KINDS)


def build_models(cfg, bundle, K):
    """Instantiate the roster's query representations from the training partition."""
    A = bundle.matrices["training"]
    n = bundle.n_nodes
    roster = list(cfg.roster) if cfg.roster else default_roster(bundle)
    if not roster:
        raise ConfigError("model roster is empty")
    if len(set(roster)) != len(roster):
        raise ConfigError("model roster has duplicate names")
    ell = min(int(cfg.ell) if cfg.ell is not None else q.default_ell(K), n)
    m = min(int(cfg.m), ell - 1)
    rho_dense, rho_sparse = resolve_rho(cfg, bundle)
    graphs = {}

    def network(name):
        if name not in graphs:
            if name in bundle.networks:
                graphs[name] = bundle.networks[name]
            elif name == "knn_dense":
                graphs[name] = build_knn(A, rho_dense)
            elif name == "knn_sparse":
                graphs[name] = build_knn(A, rho_sparse)
            elif name == "th_dense":
                graphs[name] = build_threshold(A, rho_dense)
            elif name == "th_sparse":
                graphs[name] = build_threshold(A, rho_sparse)
            else:
                raise ConfigError(f"unknown network {name!r}")
        return graphs[name]

    models = []
    for name in roster:
        kind, _, net = name.partition("@")
        if kind in NET_KINDS and not net:
            raise ConfigError(f"model {name!r}: kind {kind} needs an underlying network (kind@network)")
        if kind in FREE_KINDS and net:
            raise ConfigError(f"model {name!r}: kind {kind} takes no network")
        if kind == "bfs":
            rep = q.make_bfs(network(net))
        elif kind == "cluster":
            rep = q.make_cluster(network(net), cfg.master_seed)
        elif kind == "degree_top":
            rep = q.make_top(kind, q.rank_by_degree(network(net), ell), n)
        elif kind == "degree_net":
            rep = q.make_net(kind, q.build_adhoc_net(q.rank_by_degree(network(net), ell), A, m), n, ell)
        elif kind == "activity_top":
            rep = q.make_top(kind, q.rank_by_activity(A, ell), n)
        elif kind == "activity_net":
            rep = q.make_net(kind, q.build_adhoc_net(q.rank_by_activity(A, ell), A, m), n, ell)
        elif kind == "random":
            rep = q.make_random(n)
        else:
            raise ConfigError(f"unknown query kind {kind!r} in model {name!r}")
        models.append(ev.Model(name, rep))
    params = {"rho_dense": rho_dense, "rho_sparse": rho_sparse, "ell": ell, "m": m}
    return models, params


# ---------------------------------------------------------------- reports


def report_meta(cfg, ecfg, bundle, partition, params):
    # deliberately excludes worker count and kernel backend: reports must not depend on them
    return {
        "tool": "netmdl",
        "version": __version__,
        "compressor": mdl.compressor_info(),
        "master_seed": ecfg.master_seed,
        "cost_aggregate": ecfg.cost_aggregate,
        "include_rep_cost": ecfg.include_rep_cost,
        "partition": partition,
        "bundle_digest": bundle.manifest.get("digest"),
        "eval": {**ecfg.to_json(), "K": list(ecfg.K)},
        "representation_params": params,
    }


def _entry_json(e):
    d = asdict(e)
    d["total_cost"] = e.total_cost
    return d


def _node_json(ne):
    s = ne.per_k[ne.kappa]
    return {
        "node": ne.node,
        "kappa": ne.kappa,
        "correct": s.correct,
        "median_cost": s.median_cost,
        "e_node": ne.e_node,
        "skipped_k": list(ne.skipped_k),
    }


def table_json(table, meta, lam):
    sig = {s.model: s for s in ev.significance_all(table, lam)}
    models = []
    for r in table.results:
        s = sig[r.name]
        models.append({
            "name": r.name,
            "kind": r.kind,
            "pooled": _entry_json(r.pooled),
            "labelsets": {ls: _entry_json(e) for ls, e in r.entries.items()},
            "rep_cost_full": r.rep_cost_full,
            "reach_size": r.reach_size,
            "skipped_nodes": r.skipped_nodes,
            "significance": {"score": None if math.isnan(s.score) else s.score, "significant": s.significant},
            "nodes": {ls: [_node_json(ne) for ne in evals] for ls, evals in r.node_evals.items()},
        })
    return {"meta": meta, "selected": ev.select(table), "lambda": lam, "models": models}


CSV_COLUMNS = ("model", "correct", "task_cost", "rep_cost", "efficiency", "significance_score")


def table_csv(doc):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for m in doc["models"]:
        p = m["pooled"]
        score = m["significance"]["score"]
        w.writerow([m["name"], p["correct_total"], repr(float(p["task_cost_total"])), p["rep_cost"],
                    repr(p["efficiency"]), "" if score is None else repr(score)])
    return buf.getvalue()


def _write_text(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def print_table(doc, stream=None):
    stream = stream or sys.stdout
    print(f"partition={doc['meta']['partition']} seed={doc['meta']['master_seed']} "
          f"cost_aggregate={doc['meta']['cost_aggregate']}", file=stream)
    print(f"{'model':28s} {'correct':>8s} {'task_cost':>12s} {'rep_cost':>10s} {'efficiency':>12s} {'score':>8s}",
          file=stream)
    ranked = sorted(doc["models"], key=lambda m: -m["pooled"]["efficiency"])
    for m in ranked:
        p = m["pooled"]
        score = m["significance"]["score"]
        flag = "*" if m["significance"]["significant"] else ""
        s = "n/a" if score is None else f"{score:.2f}"
        print(f"{m['name']:28s} {p['correct_total']:8d} {p['task_cost_total']:12.1f} {p['rep_cost']:10d} "
              f"{p['efficiency']:12.6g} {s:>7s}{flag}", file=stream)
    print(f"selected: {doc['selected']}", file=stream)


# ---------------------------------------------------------------- commands


def _partition_name(name):
    name = {"test": "testing", "valid": "validation"}.get(name, name)
    if name not in ("validation", "testing"):
        raise ConfigError(f"partition must be 'validation' or 'test', got {name!r}")
    return name


def evaluate_partition(cfg, partition, bundle=None):
    bundle = bundle or load_bundle(cfg.bundle)
    ecfg = cfg.eval_config()
    models, params = build_models(cfg, bundle, ecfg.K)
    data = ev.EvalData(bundle.matrices["training"], bundle.labels["training"],
                       bundle.matrices[partition], bundle.labels[partition])
    table = ev.run_models(models, data, ecfg, jobs=cfg.jobs, partition=partition)
    meta = report_meta(cfg, ecfg, bundle, partition, params)
    return table, table_json(table, meta, ecfg.lam), models, data


def cmd_evaluate(cfg, partition):
    partition = _partition_name(partition)
    _, doc, _, _ = evaluate_partition(cfg, partition)
    out = Path(cfg.output)
    tag = "test" if partition == "testing" else "validation"
    _write_text(out / f"efficiency_{tag}.json", json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")
    _write_text(out / f"efficiency_{tag}.csv", table_csv(doc))
    print_table(doc)
    return doc


def _load_report(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"report not found: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def _ratio(a, b):
    return a / b if b else None


def select_report(val, test, lam):
    """Top-3 by validation efficiency, judged against the best model on the test partition."""
    vnames = [m["name"] for m in val["models"]]
    tnames = [m["name"] for m in test["models"]]
    if sorted(vnames) != sorted(tnames):
        raise ConfigError("validation and test reports have different model rosters")
    vm = {m["name"]: m["pooled"] for m in val["models"]}
    tm = {m["name"]: m["pooled"] for m in test["models"]}
    order = sorted(vnames, key=lambda n: (-vm[n]["efficiency"], vnames.index(n)))
    best = max(tnames, key=lambda n: (tm[n]["correct_total"], tm[n]["efficiency"], -tnames.index(n)))
    b = tm[best]
    top = []
    for n in order[:3]:
        t = tm[n]
        top.append({
            "model": n,
            "validation_efficiency": vm[n]["efficiency"],
            "E_ratio": _ratio(t["efficiency"], b["efficiency"]),
            "cost_ratio": _ratio(t["task_cost_total"] + t["rep_cost"], b["task_cost_total"] + b["rep_cost"]),
            "correct_ratio": _ratio(t["correct_total"], b["correct_total"]),
        })
    v_eff = [vm[n]["efficiency"] for n in vnames]
    t_eff = [tm[n]["efficiency"] for n in vnames]
    out = {
        "meta": {k: val["meta"][k] for k in ("version", "compressor", "master_seed", "cost_aggregate")},
        "selected": order[0],
        "best_by_correct_test": best,
        "top3": top,
        "lambda": lam,
    }
    if len(vnames) >= 2:
        tau, p = ev.kendall_tau(v_eff, t_eff)
        tau2, p2 = ev.kendall_tau(v_eff, [vm[n]["correct_total"] for n in vnames])
        out["tau_validation_test"] = {"tau": _finite(tau), "p": _finite(p)}
        out["tau_efficiency_correct"] = {"tau": _finite(tau2), "p": _finite(p2)}
    if len(vnames) >= 4:
        sig = [ev.significance(v_eff, r, lam, n) for r, n in enumerate(vnames)]
        out["significance"] = [{"model": s.model, "score": s.score, "significant": s.significant} for s in sig]
    return out


def _finite(x):
    return None if x is None or math.isnan(x) else x


def cmd_select(val_path, test_path, lam, out_path=None):
    doc = select_report(_load_report(val_path), _load_report(test_path), lam)
    text = json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if out_path:
        _write_text(Path(out_path), text)
    print(f"selected (validation): {doc['selected']}; best by correct on test: {doc['best_by_correct_test']}")
    for row in doc["top3"]:
        fmt = lambda x: "n/a" if x is None else f"{x:.3f}"
        print(f"  {row['model']:28s} E/E_best={fmt(row['E_ratio'])} cost/cost_best={fmt(row['cost_ratio'])} "
              f"correct/correct_best={fmt(row['correct_ratio'])}")
    if "tau_validation_test" in doc:
        print(f"  tau(validation, test) = {doc['tau_validation_test']['tau']}")
    return doc


class _TableView:
    """Minimal stand-in for an EfficiencyTable rebuilt from a saved report."""

    def __init__(self, doc):
        self.doc = doc
        self.models = [m["name"] for m in doc["models"]]

    def efficiencies(self):
        return [m["pooled"]["efficiency"] for m in self.doc["models"]]


def cmd_noise(cfg, partition="validation"):
    partition = _partition_name(partition)
    ecfg = cfg.eval_config()
    p_grid = [float(p) for p in cfg.noise_grid]
    if not p_grid or p_grid[0] != 0.0 or any(a >= b for a, b in zip(p_grid, p_grid[1:])):
        raise ConfigError("noise grid must be ascending and start at 0")
    table, doc, models, data = evaluate_partition(cfg, partition)
    sig = ev.significance_all(table, ecfg.lam)
    targets = [s.model for s in sig if s.significant]
    excluded = [s.model for s in sig if not s.significant]
    rows = ev.noise_sweep(models, targets, p_grid, data, ecfg, table, jobs=cfg.jobs)
    out = {
        "meta": {**doc["meta"], "noise_grid": p_grid},
        "targets": targets,
        "excluded_not_significant": excluded,
        "rows": [{**asdict(r), "score": _finite(r.score)} for r in rows],
    }
    dest = Path(cfg.output)
    _write_text(dest / "noise.json", json.dumps(out, indent=2, sort_keys=True, allow_nan=False) + "\n")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("model", "p", "correct", "task_cost", "rep_cost", "efficiency", "significance_score", "significant"))
    for r in rows:
        w.writerow((r.model, repr(r.p), r.correct_total, repr(float(r.task_cost_total)), r.rep_cost,
                    repr(r.efficiency), "" if math.isnan(r.score) else repr(r.score), int(r.significant)))
    _write_text(dest / "noise.csv", buf.getvalue())
    if not targets:
        print("no significant models; nothing to sweep")
    for r in rows:
        print(f"{r.model:28s} p={r.p:<5g} efficiency={r.efficiency:.6g} significant={r.significant}")
    if excluded:
        print(f"excluded (not significant): {', '.join(excluded)}")
    return out


def cmd_report(paths):
    for path in paths:
        doc = _load_report(path)
        if "models" in doc:
            print_table(doc)
        elif "rows" in doc:
            for r in doc["rows"]:
                print(f"{r['model']:28s} p={r['p']:<5g} efficiency={r['efficiency']:.6g}")
        else:
            print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------- entry point


def _add_overrides(p):
    p.add_argument("--config", help="JSON run config")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--b", type=int, help="replicates per (node, k)")
    p.add_argument("--k-grid", help="comma-separated sample sizes, e.g. 25,50,75")
    p.add_argument("--rho-dense", type=int)
    p.add_argument("--rho-sparse", type=int)
    p.add_argument("--lambda", dest="lam", type=float, help="significance threshold")
    p.add_argument("--noise-grid", help="comma-separated rewiring probabilities starting at 0")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--bundle", help="dataset bundle directory")
    p.add_argument("--out", help="output directory")
    p.add_argument("--roster", help="comma-separated model names (kind or kind@network)")


def build_parser():
    ap = argparse.ArgumentParser(prog="netmdl", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"netmdl {__version__} ({BACKEND} kernels)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("ingest", help="load or generate data and write a dataset bundle")
    _add_overrides(p)
    p = sub.add_parser("evaluate", help="evaluate the model roster on one partition")
    _add_overrides(p)
    p.add_argument("--partition", default="validation", help="validation or test")
    p = sub.add_parser("select", help="compare validation and test reports")
    p.add_argument("validation")
    p.add_argument("test")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--out", help="write the selection report here (JSON)")
    p = sub.add_parser("noise", help="rewiring sweep over the significant models")
    _add_overrides(p)
    p.add_argument("--partition", default="validation", help="validation or test")
    p = sub.add_parser("report", help="print saved reports")
    p.add_argument("paths", nargs="+")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "ingest":
            cmd_ingest(load_config(args))
        elif args.command == "evaluate":
            cmd_evaluate(load_config(args), args.partition)
        elif args.command == "select":
            cmd_select(args.validation, args.test, args.lam, args.out)
        elif args.command == "noise":
            cmd_noise(load_config(args), args.partition)
        elif args.command == "report":
            cmd_report(args.paths)
    except (ConfigError, DataError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # evaluation failures
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

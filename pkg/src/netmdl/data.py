"""Activity-event ingestion, temporal splitting, label derivation and a
planted-partition synthetic generator."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Raised for malformed or invalid input data."""


@dataclass(frozen=True)
class ActivityEvent:
    user: int
    item: int
    value: float
    timestamp: int


@dataclass
class EventLog:
    """Parsed events with dense ids plus the tables mapping them back to the raw tokens."""

    events: list
    users: list = field(default_factory=list)
    items: list = field(default_factory=list)

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    @property
    def n_nodes(self):
        return len(self.users)

    @property
    def n_items(self):
        return len(self.items)


class AttributeMatrix:
    """Sparse nonnegative per-node activity vectors in CSR layout.

    Rows hold (item, value) pairs sorted by item; only strictly positive
    values are stored. A column-major copy is built lazily for the
    similarity kernels.
    """

    def __init__(self, n_nodes, n_items, indptr, indices, data):
        self.n_nodes = int(n_nodes)
        self.n_items = int(n_items)
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self._csc = None

    @classmethod
    def from_triples(cls, n_nodes, n_items, users, items, values):
        """Build from (user, item, value) triples, summing duplicates and dropping zeros."""
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        values = np.asarray(values, dtype=np.float64)
        if users.size:
            if users.min() < 0 or users.max() >= n_nodes:
                raise DataError("user id out of range")
            if items.min() < 0 or items.max() >= n_items:
                raise DataError("item id out of range")
            if values.min() < 0:
                raise DataError("negative value")
        key = users * max(n_items, 1) + items
        order = np.argsort(key, kind="stable")
        key, values = key[order], values[order]
        uniq, start = np.unique(key, return_index=True)
        sums = np.add.reduceat(values, start) if uniq.size else np.zeros(0)
        keep = sums > 0
        uniq, sums = uniq[keep], sums[keep]
        rows = uniq // max(n_items, 1)
        cols = uniq % max(n_items, 1)
        indptr = np.zeros(n_nodes + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        return cls(n_nodes, n_items, np.cumsum(indptr), cols, sums)

    @classmethod
    def from_rows(cls, rows, n_items=None):
        """Build from a list of ``{item: value}`` dicts (one per node)."""
        users, items, values = [], [], []
        for u, row in enumerate(rows):
            for it, v in row.items():
                users.append(u)
                items.append(it)
                values.append(v)
        if n_items is None:
            n_items = max(items) + 1 if items else 0
        return cls.from_triples(len(rows), n_items, users, items, values)

    @classmethod
    def empty(cls, n_nodes, n_items):
        return cls(n_nodes, n_items, np.zeros(n_nodes + 1, np.int64), [], [])

    def row(self, i):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    def activity(self, i=None):
        """Number of stored (non-zero) entries of row ``i``, or of every row."""
        counts = np.diff(self.indptr)
        return counts if i is None else int(counts[i])

    @property
    def nnz(self):
        return int(self.indices.size)

    def csc(self):
        if self._csc is None:
            order = np.argsort(self.indices, kind="stable")
            rows = np.repeat(np.arange(self.n_nodes, dtype=np.int64), np.diff(self.indptr))
            cindptr = np.zeros(self.n_items + 1, dtype=np.int64)
            np.add.at(cindptr, self.indices + 1, 1)
            self._csc = (
                np.cumsum(cindptr),
                np.ascontiguousarray(rows[order]),
                np.ascontiguousarray(self.data[order]),
            )
        return self._csc

    def to_dense(self):
        out = np.zeros((self.n_nodes, self.n_items))
        for i in range(self.n_nodes):
            idx, val = self.row(i)
            out[i, idx] = val
        return out

    def __eq__(self, other):
        if not isinstance(other, AttributeMatrix):
            return NotImplemented
        return (
            self.n_nodes == other.n_nodes
            and self.n_items == other.n_items
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.data, other.data)
        )

    def __repr__(self):
        return f"AttributeMatrix(n_nodes={self.n_nodes}, n_items={self.n_items}, nnz={self.nnz})"


@dataclass(frozen=True)
class Labelset:
    name: str
    positives: frozenset


@dataclass
class LabelCatalog:
    labelsets: list
    n_nodes: int

    def __post_init__(self):
        for ls in self.labelsets:
            if any(p < 0 or p >= self.n_nodes for p in ls.positives):
                raise DataError(f"labelset {ls.name!r} has a node id outside 0..{self.n_nodes - 1}")

    def retained(self):
        """Catalog restricted to labelsets with at least one positive node."""
        return LabelCatalog([ls for ls in self.labelsets if ls.positives], self.n_nodes)

    def get(self, name):
        for ls in self.labelsets:
            if ls.name == name:
                return ls
        raise KeyError(name)

    def vector(self, name):
        out = np.zeros(self.n_nodes, dtype=np.int64)
        pos = sorted(self.get(name).positives)
        out[pos] = 1
        return out

    @property
    def names(self):
        return [ls.name for ls in self.labelsets]

    def to_json(self):
        return {
            "n_nodes": self.n_nodes,
            "labelsets": [{"name": ls.name, "positives": sorted(ls.positives)} for ls in self.labelsets],
        }

    @classmethod
    def from_json(cls, doc):
        return cls(
            [Labelset(d["name"], frozenset(int(p) for p in d["positives"])) for d in doc["labelsets"]],
            int(doc["n_nodes"]),
        )


@dataclass(frozen=True)
class LabelRule:
    name: str
    items: tuple
    min_value_per_item: float = 5.0
    min_items: int = 5


@dataclass
class TemporalSplit:
    validation: AttributeMatrix
    training: AttributeMatrix
    testing: AttributeMatrix
    boundaries: tuple
    events: tuple = ()

    @property
    def counts(self):
        return tuple(len(e) for e in self.events)

    def partition(self, name):
        name = {"test": "testing", "train": "training"}.get(name, name)
        return getattr(self, name)


def _fail(path, lineno, msg):
    raise DataError(f"{path}: row {lineno}: {msg}")


def load_events(path, format="tsv"):
    """Parse a 4-column event file (user, item, value, timestamp).

    Raw user and item tokens are remapped to dense ids in order of first
    appearance; the raw tokens are kept on the returned :class:`EventLog`.
    Lines starting with ``#`` and blank lines are skipped.
    """
    if format not in ("tsv", "csv"):
        raise DataError(f"unknown events format {format!r}")
    delim = "\t" if format == "tsv" else ","
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(str(path))
    users, items = {}, {}
    events = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = next(csv.reader([text], delimiter=delim))
            if len(fields) != 4:
                _fail(path, lineno, f"expected 4 fields, got {len(fields)}")
            u, it, v, ts = (f.strip() for f in fields)
            try:
                value = float(v)
            except ValueError:
                _fail(path, lineno, f"unparseable value {v!r}")
            if not math.isfinite(value) or value < 0:
                _fail(path, lineno, f"negative or non-finite value {v!r}")
            try:
                stamp = int(ts)
            except ValueError:
                try:
                    f = float(ts)
                except ValueError:
                    _fail(path, lineno, f"unparseable timestamp {ts!r}")
                if not f.is_integer():
                    _fail(path, lineno, f"unparseable timestamp {ts!r}")
                stamp = int(f)
            uid = users.setdefault(u, len(users))
            iid = items.setdefault(it, len(items))
            events.append(ActivityEvent(uid, iid, value, stamp))
    return EventLog(events, list(users), list(items))


def write_events(events, path, format="tsv", users=None, items=None):
    """Write events back out, optionally mapping dense ids to raw tokens."""
    delim = "\t" if format == "tsv" else ","
    with open(path, "w", encoding="utf-8") as fh:
        for e in events:
            u = users[e.user] if users is not None else e.user
            it = items[e.item] if items is not None else e.item
            fh.write(f"{u}{delim}{it}{delim}{e.value!r}{delim}{e.timestamp}\n")


def events_to_matrix(events, n_nodes, n_items):
    if not events:
        return AttributeMatrix.empty(n_nodes, n_items)
    users = [e.user for e in events]
    items = [e.item for e in events]
    values = [e.value for e in events]
    return AttributeMatrix.from_triples(n_nodes, n_items, users, items, values)


def _cut_index(stamps, pos):
    """Advance a cut so events sharing a timestamp stay in the earlier partition."""
    n = len(stamps)
    if pos <= 0:
        return 0
    if pos >= n:
        return n
    return int(np.searchsorted(stamps, stamps[pos - 1], side="right"))


def temporal_split(events, fractions=(1 / 3, 1 / 3, 1 / 3), by="count", n_nodes=None, n_items=None):
    """Split events into contiguous validation / training / testing partitions.

    ``by="count"`` cuts at the event-count quantiles; ``by="time"`` cuts the
    timestamp span proportionally. Ties at a cut go to the earlier partition.
    """
    events = list(events)
    if not events:
        raise DataError("cannot split an empty event list")
    f = tuple(float(x) for x in fractions)
    if len(f) != 3 or min(f) <= 0 or abs(sum(f) - 1.0) > 1e-9:
        raise DataError(f"fractions must be three positive numbers summing to 1, got {fractions}")
    if n_nodes is None:
        n_nodes = max(e.user for e in events) + 1
    if n_items is None:
        n_items = max(e.item for e in events) + 1
    ordered = sorted(events, key=lambda e: e.timestamp)
    stamps = np.array([e.timestamp for e in ordered], dtype=np.int64)
    n = len(ordered)
    if by == "count":
        c1 = _cut_index(stamps, int(round(f[0] * n)))
        c2 = max(c1, _cut_index(stamps, int(round((f[0] + f[1]) * n))))
    elif by == "time":
        lo, hi = int(stamps[0]), int(stamps[-1])
        t1 = lo + f[0] * (hi - lo)
        t2 = lo + (f[0] + f[1]) * (hi - lo)
        c1 = int(np.searchsorted(stamps, t1, side="right"))
        c2 = max(c1, int(np.searchsorted(stamps, t2, side="right")))
    else:
        raise DataError(f"unknown split mode {by!r}")
    parts = (ordered[:c1], ordered[c1:c2], ordered[c2:])
    bounds = (
        int(stamps[c1 - 1]) if c1 > 0 else int(stamps[0]) - 1,
        int(stamps[c2 - 1]) if c2 > 0 else int(stamps[0]) - 1,
    )
    mats = [events_to_matrix(p, n_nodes, n_items) for p in parts]
    return TemporalSplit(mats[0], mats[1], mats[2], bounds, parts)


def derive_labels(matrix, rules):
    """Positive iff at least ``min_items`` rule items have value >= ``min_value_per_item``.

    Empty labelsets are kept; use :meth:`LabelCatalog.retained` to drop them.
    """
    out = []
    for rule in rules:
        items = np.unique(np.asarray(rule.items, dtype=np.int64))
        if items.size and (items.min() < 0 or items.max() >= matrix.n_items):
            raise DataError(f"rule {rule.name!r} names an item outside 0..{matrix.n_items - 1}")
        hit = np.isin(matrix.indices, items) & (matrix.data >= rule.min_value_per_item)
        rows = np.repeat(np.arange(matrix.n_nodes), np.diff(matrix.indptr))
        counts = np.bincount(rows[hit], minlength=matrix.n_nodes)
        pos = np.flatnonzero(counts >= rule.min_items)
        out.append(Labelset(rule.name, frozenset(int(p) for p in pos)))
    return LabelCatalog(out, matrix.n_nodes)


def load_label_rules(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, list):
        raise DataError("label rules must be a JSON array")
    rules = []
    for k, d in enumerate(doc):
        try:
            rules.append(
                LabelRule(
                    str(d["name"]),
                    tuple(int(x) for x in d["items"]),
                    float(d.get("min_value_per_item", 5)),
                    int(d.get("min_items", 5)),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"label rule {k}: {exc}") from exc
    return rules


@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs of the planted-partition generator.

    ``intra_affinity`` is the probability that an item draw comes from the
    node's community block, and also the expected fraction of a node's
    ground-truth edges that stay inside its community.
    """

    n_nodes: int = 500
    n_items: int = 1000
    n_communities: int = 5
    intra_affinity: float = 0.8
    activity_skew: float = 0.5
    label_community_alignment: float = 0.9
    seed: int = 0
    n_labelsets: int = 2
    mean_activity: int = 60
    mean_value: float = 4.0
    mean_degree: float = 10.0
    n_timestamps: int = 1_000_000

    def validate(self):
        for name in ("intra_affinity", "label_community_alignment"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DataError(f"{name} must lie in [0, 1], got {v}")
        if self.n_communities < 1 or self.n_communities > self.n_nodes:
            raise DataError("need 1 <= n_communities <= n_nodes")
        if self.n_items < self.n_communities:
            raise DataError("need at least one item per community")
        if self.activity_skew < 0 or self.mean_activity < 1 or self.mean_value <= 0:
            raise DataError("activity parameters must be positive")
        if self.mean_degree < 0 or self.mean_degree > self.n_nodes - 1:
            raise DataError("mean_degree must lie in [0, n_nodes - 1]")

    @classmethod
    def from_json(cls, doc):
        known = set(cls.__dataclass_fields__)
        unknown = set(doc) - known
        if unknown:
            raise DataError(f"unknown synthetic config fields: {sorted(unknown)}")
        return cls(**doc)

    def to_json(self):
        return asdict(self)


@dataclass
class SyntheticData:
    events: list
    split: TemporalSplit
    full: AttributeMatrix
    labels: LabelCatalog
    communities: np.ndarray
    edges: object  # netmodel.EdgeSet of the planted ground-truth graph
    config: SyntheticConfig


def generate_synthetic(cfg):
    """Planted-partition dataset: communities, item blocks, labels and a ground-truth graph.

    Each community prefers one contiguous block of items. A node touches
    ``round(mean_activity * w)`` distinct items, with ``w`` lognormal of
    sigma ``activity_skew`` normalised to mean 1 (so ``w = 1`` at zero
    skew). Labelset ``j`` is aligned with community ``j mod C``: members
    are positive with probability ``label_community_alignment``, everyone
    else with probability ``(1 - alignment) / max(C - 1, 1)``. Every
    (node, item) pair becomes one event with a uniform timestamp, and the
    events are split into thirds by count.
    """
    from .netmodel import EdgeSet

    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    n, n_items, C = cfg.n_nodes, cfg.n_items, cfg.n_communities
    communities = (rng.permutation(n) % C).astype(np.int64)
    block_edges = np.linspace(0, n_items, C + 1).astype(np.int64)

    if cfg.activity_skew > 0:
        w = rng.lognormal(0.0, cfg.activity_skew, n)
        w = w / w.mean()
    else:
        w = np.ones(n)
    activity = np.clip(np.rint(cfg.mean_activity * w).astype(np.int64), 1, n_items)

    users, items, values = [], [], []
    for i in range(n):
        c = communities[i]
        lo, hi = block_edges[c], block_edges[c + 1]
        chosen = set()
        want = int(activity[i])
        while len(chosen) < want:
            if rng.random() < cfg.intra_affinity and len(chosen) < hi - lo:
                it = int(rng.integers(lo, hi))
            else:
                it = int(rng.integers(0, n_items))
            chosen.add(it)
        chosen = sorted(chosen)
        vals = 1 + rng.poisson(cfg.mean_value - 1 if cfg.mean_value > 1 else 0, len(chosen))
        users.extend([i] * len(chosen))
        items.extend(chosen)
        values.extend(float(v) for v in vals)

    stamps = rng.integers(0, cfg.n_timestamps, len(users))
    events = [ActivityEvent(u, it, v, int(t)) for u, it, v, t in zip(users, items, values, stamps)]
    split = temporal_split(events, (1 / 3, 1 / 3, 1 / 3), n_nodes=n, n_items=n_items)
    full = AttributeMatrix.from_triples(n, n_items, users, items, values)

    alpha = cfg.label_community_alignment
    p_out = (1.0 - alpha) / max(C - 1, 1)
    labelsets = []
    for j in range(cfg.n_labelsets):
        aligned = j % C
        prob = np.where(communities == aligned, alpha, p_out)
        pos = np.flatnonzero(rng.random(n) < prob)
        labelsets.append(Labelset(f"label_{j}", frozenset(int(p) for p in pos)))
    labels = LabelCatalog(labelsets, n)

    # undirected planted-partition graph, stored as reciprocal directed edges
    sizes = np.bincount(communities, minlength=C)
    same_pairs = float(sum(s * (s - 1) / 2 for s in sizes))
    all_pairs = n * (n - 1) / 2
    target = cfg.mean_degree * n / 2
    p_in = min(1.0, cfg.intra_affinity * target / same_pairs) if same_pairs else 0.0
    diff_pairs = all_pairs - same_pairs
    p_x = min(1.0, (1 - cfg.intra_affinity) * target / diff_pairs) if diff_pairs else 0.0
    iu, ju = np.triu_indices(n, k=1)
    same = communities[iu] == communities[ju]
    keep = rng.random(iu.size) < np.where(same, p_in, p_x)
    src = np.concatenate([iu[keep], ju[keep]])
    dst = np.concatenate([ju[keep], iu[keep]])
    edges = EdgeSet.from_pairs(n, src, dst, directed=False)
    return SyntheticData(events, split, full, labels, communities, edges, cfg)

"""Description-length cost: MessagePack serialization followed by LZ4 block compression."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import lz4
import lz4.block
import msgpack
import numpy as np

# Pinned compressor settings; echoed into every report.
LZ4_MODE = "default"
LZ4_STORE_SIZE = True


class SerializationError(ValueError):
    pass


@dataclass(frozen=True)
class CostReport:
    raw_bytes: int
    compressed_bytes: int


def compressor_info():
    return {
        "serializer": "msgpack",
        "msgpack_version": ".".join(map(str, msgpack.version)),
        "compressor": "lz4.block",
        "lz4_version": lz4.__version__,
        "lz4_library": lz4.library_version_string(),
        "lz4_mode": LZ4_MODE,
        "lz4_store_size": LZ4_STORE_SIZE,
    }


_INT_MIN = -(1 << 63)
_UINT_MAX = (1 << 64) - 1


def canonical(o):
    """Convert ``o`` into plain ints, floats and lists, validating ranges."""
    if isinstance(o, (bool, np.bool_)):
        return int(o)
    if isinstance(o, (int, np.integer)):
        v = int(o)
        if v < _INT_MIN or v > _UINT_MAX:
            raise SerializationError(f"integer {v} outside the 64-bit range")
        return v
    if isinstance(o, (float, np.floating)):
        v = float(o)
        if not math.isfinite(v):
            raise SerializationError(f"non-finite real {v}")
        return v
    if isinstance(o, np.ndarray):
        if o.dtype.kind == "b":
            return o.astype(np.int64).tolist()
        if o.dtype.kind == "f":
            if not np.all(np.isfinite(o)):
                raise SerializationError("non-finite real in array")
            return o.tolist()
        if o.dtype.kind in "iu":
            return o.tolist()
        return [canonical(x) for x in o.tolist()]
    if isinstance(o, (list, tuple)):
        return [canonical(x) for x in o]
    raise SerializationError(f"cannot encode object of type {type(o).__name__}")


_FAST_REJECT = ('"', "{", "true", "false", "null")


def serialize(o):
    """MessagePack bytes with minimal-width integers and 64-bit floats."""
    # fast path: plain nested lists of ints/finite floats are validated by the
    # json encoder at C speed; anything else goes through canonical()
    try:
        text = json.dumps(o, allow_nan=False)
    except (TypeError, ValueError):
        text = None
    if text is not None and not any(tok in text for tok in _FAST_REJECT):
        try:
            return msgpack.packb(o, use_bin_type=True, use_single_float=False)
        except OverflowError as exc:
            raise SerializationError(str(exc)) from None
    return msgpack.packb(canonical(o), use_bin_type=True, use_single_float=False)


def compress(raw):
    return lz4.block.compress(raw, mode=LZ4_MODE, store_size=LZ4_STORE_SIZE)


def cost_report(o):
    raw = serialize(o)
    return CostReport(len(raw), len(compress(raw)))


def cost(o):
    """Length in bytes of the compressed serialization of ``o``."""
    return len(compress(serialize(o)))


def _delta(ids):
    ids = [int(x) for x in ids]
    return ids[:1] + [b - a for a, b in zip(ids, ids[1:])]


def encode_query_rep(rep, delta=False):
    """Canonical encodable form of a query representation.

    Ranked lists and node pools become one list of node ids; community maps
    a list of member lists; edge sets and ad-hoc nets an adjacency list of
    lists indexed by node. With ``delta=True`` each sorted id list is
    delta-encoded.
    """
    from .queryfn import AdHocNet, CommunityMap, NodePool, RankedList
    from .netmodel import EdgeSet

    p = rep.payload
    enc = _delta if delta else (lambda ids: [int(x) for x in ids])
    if isinstance(p, RankedList):
        # rank order carries information; never delta-encode
        return [int(x) for x in p.ids]
    if isinstance(p, NodePool):
        return enc(np.sort(p.ids))
    if isinstance(p, CommunityMap):
        return [enc(g) for g in p.groups()]
    if isinstance(p, AdHocNet):
        p = p.edges
    if isinstance(p, EdgeSet):
        return [enc(p.neighbors(i)) for i in range(p.n_nodes)]
    raise TypeError(f"unsupported payload {type(p).__name__}")


def encode_task_models(forest_reprs):
    """List of forest representations, kept in the given (training) order."""
    return [r for r in forest_reprs]

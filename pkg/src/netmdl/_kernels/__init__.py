"""Hot-kernel backend selection.

The compiled extension is used when it is importable; otherwise the numpy
implementation is used. Set ``NETMDL_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("NETMDL_PURE_PYTHON", "") not in ("", "0"):
    from ._pykernels import BACKEND, child_key, grow_tree, nonzero_csr, row_similarity, splitmix64
else:
    try:
        from ._ckernels import BACKEND, child_key, grow_tree, nonzero_csr, row_similarity, splitmix64
    except ImportError:  # extension not built
        from ._pykernels import BACKEND, child_key, grow_tree, nonzero_csr, row_similarity, splitmix64

__all__ = ["BACKEND", "child_key", "grow_tree", "nonzero_csr", "row_similarity", "splitmix64"]

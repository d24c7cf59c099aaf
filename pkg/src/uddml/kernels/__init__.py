"""Kernel backend selection.

Hot numeric loops (pairwise discrepancy sums, boosted-tree growth) exist in
two interchangeable implementations: numba-jitted (``numba_impl``) and pure
numpy (``numpy_impl``). The active one is picked at import time from the
UDDML_BACKEND environment variable:

* unset        -> numba if importable, else numpy
* ``numba``    -> numba, raise if unavailable
* ``numpy``    -> the pure-numpy fallback

``benchmarks/kernel_benchmark.py`` times the two side by side.
"""

import os

_requested = os.environ.get("UDDML_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"UDDML_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numpy":
    from .numpy_impl import (a1_product_sum, grow_tree, kernel_cross_sum,
                             kernel_self_sum, tree_predict)
    ACTIVE_BACKEND = "numpy"
else:
    try:
        from .numba_impl import (a1_product_sum, grow_tree, kernel_cross_sum,
                                 kernel_self_sum, tree_predict)
        ACTIVE_BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        from .numpy_impl import (a1_product_sum, grow_tree, kernel_cross_sum,
                                 kernel_self_sum, tree_predict)
        ACTIVE_BACKEND = "numpy"

__all__ = [
    "ACTIVE_BACKEND",
    "a1_product_sum",
    "grow_tree",
    "kernel_cross_sum",
    "kernel_self_sum",
    "tree_predict",
]

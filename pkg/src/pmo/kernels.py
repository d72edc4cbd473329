"""Kernel selection: the compiled extension when it imports, else pure Python.

Set ``PMO_PURE_PYTHON=1`` to force the fallback.
"""
import os

from pmo import _kernels_py

BACKEND = "python"

if os.environ.get("PMO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from pmo import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

poly_mul = _impl.poly_mul
grlex_rank_array = _impl.grlex_rank_array
localizing_triplets = _impl.localizing_triplets
gram_coefficient_map = _impl.gram_coefficient_map

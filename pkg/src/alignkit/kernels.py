"""Kernel backend selection.

The compiled extension is used when importable; set ``ALIGNKIT_PURE_PYTHON=1``
to force the pure-Python implementations.
"""
import os

from . import _kernels_py

BACKEND = "python"
if not os.environ.get("ALIGNKIT_PURE_PYTHON"):
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
else:
    _impl = _kernels_py

lsap = _impl.lsap
canonical_factors = _impl.canonical_factors

__all__ = ["BACKEND", "lsap", "canonical_factors"]

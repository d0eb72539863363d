"""Kernel dispatch: compiled extension when importable, numpy otherwise.

Set ``DFSQ_KERNELS=python`` to force the numpy fallback.
"""
import os

import numpy as np

from .errors import InvalidInputError

if os.environ.get("DFSQ_KERNELS", "").lower() == "python":
    from . import _pykernels as _impl
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        from . import _pykernels as _impl
        BACKEND = "python"


def _vec(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1:
        x = x.ravel()
    return x


def encode(boundaries, x):
    """0-based cell indices; raises on NaN input."""
    x = _vec(x)
    if np.isnan(x).any():
        raise InvalidInputError("cannot encode NaN")
    return _impl.encode(_vec(boundaries), x)


def quantize(boundaries, table, x):
    x = _vec(x)
    if np.isnan(x).any():
        raise InvalidInputError("cannot encode NaN")
    return _impl.quantize(_vec(boundaries), _vec(table), x)


def cell_counts(boundaries, x):
    return _impl.cell_counts(_vec(boundaries), _vec(x))


def table_error_sums(target, boundaries, table, x):
    return _impl.table_error_sums(_vec(target), _vec(boundaries), _vec(table), _vec(x))


def error_sums(a, b):
    return _impl.error_sums(_vec(a), _vec(b))


def backend_module(name):
    """The raw kernel module for ``name`` in {"cython", "python"} (benchmarks, tests)."""
    if name == "python":
        from . import _pykernels
        return _pykernels
    from . import _ckernels
    return _ckernels

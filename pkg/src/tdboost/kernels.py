"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy versions
in ``_pykernels``. Set ``TDBOOST_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

if os.environ.get("TDBOOST_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

log_wright_series = _impl.log_wright_series
grow_tree = _impl.grow_tree
apply_tree = _impl.apply_tree

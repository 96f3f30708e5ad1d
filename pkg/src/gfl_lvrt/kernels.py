"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``GFL_LVRT_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

if os.environ.get("GFL_LVRT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

solve_loop = _impl.solve_loop
stability_grid = _impl.stability_grid
law_refs = _impl.law_refs

OK = _pykernels.OK
SCANNED = _pykernels.SCANNED
NO_SOLUTION = _pykernels.NO_SOLUTION
LABEL_STABLE = _pykernels.LABEL_STABLE
LABEL_LOS = _pykernels.LABEL_LOS
LABEL_NOSOL = _pykernels.LABEL_NOSOL

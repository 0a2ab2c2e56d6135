"""Kernel selection.

The compiled Cython kernels are used when the extension was built;
otherwise the numpy versions in ``_kernels_py`` are used. Setting
``TWINWATCH_PURE=1`` forces the fallback.
"""

import os

from . import _kernels_py

try:
    if os.environ.get("TWINWATCH_PURE", "") not in ("", "0"):
        raise ImportError("pure kernels requested")
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def get_filter_run(name=None):
    name = name or BACKEND
    if name == "python":
        return _kernels_py.filter_run
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available")
        return _compiled.filter_run
    raise ValueError(f"unknown backend {name!r}")


def compiled_available() -> bool:
    return _compiled is not None

"""Kernel selection: the compiled extension when available, else the numpy fallback.

Set ``GDIRICHLET_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("GDIRICHLET_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

IMPLEMENTATION = _impl.IMPLEMENTATION
enum_upper = _impl.enum_upper
merge_sorted = _impl.merge_sorted
systole_grid = _impl.systole_grid


def implementations():
    """Map of available implementation name to module."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels
        found["compiled"] = _kernels
    except ImportError:
        pass
    return found

"""Kernel backend selection.

The compiled extension is used when it imports cleanly; setting the
environment variable ``SHINEFS_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _fallback

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def get_backend(name=None):
    """Return the kernel module for ``name`` ("cython", "python" or None for the default)."""
    if name is None:
        if _compiled is not None and not os.environ.get("SHINEFS_PURE_PYTHON"):
            return _compiled
        return _fallback
    if name == "python":
        return _fallback
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    return ["cython", "python"] if _compiled is not None else ["python"]


kernels = get_backend()
BACKEND = "cython" if kernels is _compiled else "python"

"""Numba switch for the hot propagation kernels.

Set ``WGQED_DISABLE_NUMBA=1`` before import to route every kernel through its
pure-numpy/scipy fallback. Both paths agree to round-off.
"""
import os

_FLAG = os.environ.get("WGQED_DISABLE_NUMBA", "").strip().lower()

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and _FLAG not in ("1", "true", "yes", "on")


def backend_name():
    return "numba" if USE_NUMBA else "numpy"

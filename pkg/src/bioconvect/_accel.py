"""Optional numba acceleration.

Set ``BIOCONVECT_DISABLE_NUMBA=1`` to force the pure-numpy kernels.
"""
import os

DISABLE_NUMBA = os.environ.get("BIOCONVECT_DISABLE_NUMBA", "").lower() in ("1", "true", "yes")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

USE_NUMBA = numba is not None and not DISABLE_NUMBA


def njit(func):
    """``numba.njit(cache=True)`` when available, identity otherwise."""
    if numba is None:
        return func
    return numba.njit(cache=True)(func)

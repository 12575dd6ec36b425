"""Numba toggle shared by all kernel modules.

Set ``FEEDCONTAGION_DISABLE_NUMBA=1`` before import to force the pure-numpy
kernels. The flag is read once, at import time.
"""
import os

_disabled = os.environ.get("FEEDCONTAGION_DISABLE_NUMBA", "").strip().lower() in (
    "1",
    "true",
    "yes",
)

try:
    if _disabled:
        raise ImportError("numba disabled by FEEDCONTAGION_DISABLE_NUMBA")
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False
    _njit = None


def njit(func):
    """``numba.njit(cache=True)`` when available, identity otherwise."""
    if _njit is None:
        return func
    return _njit(cache=True)(func)


def numba_available():
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True

"""Optional numba acceleration.

Kernels in :mod:`mabwlan.kernels` are written in the numba-compatible subset of
Python over numpy arrays. When numba is unavailable, or the environment variable
``MABWLAN_DISABLE_NUMBA`` is set to a non-empty value other than ``0``, the
decorator below is a no-op and the very same code runs interpreted.
"""

import os

_flag = os.environ.get("MABWLAN_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _flag not in ("", "0", "false", "no")

try:
    if DISABLED_BY_ENV:
        raise ImportError
    import numba

    USE_NUMBA = True
except ImportError:
    numba = None
    USE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when acceleration is active, identity otherwise."""
    if USE_NUMBA:
        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn


def backend() -> str:
    return "numba" if USE_NUMBA else "python"

"""Backend selection for the hot kernels.

Set ``MSTLD_DISABLE_NUMBA=1`` before import to force the pure-numpy paths.
"""
import os

_DISABLED = os.environ.get("MSTLD_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by MSTLD_DISABLE_NUMBA")
    from numba import njit as _njit
    HAVE_NUMBA = True
except ImportError:
    _njit = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available, otherwise a no-op decorator."""
    if HAVE_NUMBA:
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def backend():
    return "numba" if HAVE_NUMBA else "numpy"

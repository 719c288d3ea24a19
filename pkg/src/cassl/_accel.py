"""
Numba switch.

Set ``CASSL_DISABLE_NUMBA=1`` in the environment (before importing
:mod:`cassl`) to run every kernel through its pure-numpy implementation.
If numba is not importable the numpy path is used automatically.
"""
import os
import warnings

_DISABLED = os.environ.get("CASSL_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False
    if not _DISABLED:
        warnings.warn("numba is not installed - falling back to numpy kernels")

USE_NUMBA = HAVE_NUMBA and not _DISABLED


def njit(*args, **kw):
    """``numba.njit`` when available, otherwise a passthrough decorator."""
    if HAVE_NUMBA:
        return _numba_njit(*args, **kw)
    if len(args) == 1 and callable(args[0]) and not kw:
        return args[0]
    return lambda f: f


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"

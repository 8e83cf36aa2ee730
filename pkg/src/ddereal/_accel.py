"""Optional numba acceleration.

Set ``DDEREAL_DISABLE_NUMBA=1`` to force the pure-numpy code paths, e.g. for
debugging or on platforms without a working numba install.
"""

from __future__ import annotations

import os

_FLAG = "DDEREAL_DISABLE_NUMBA"


def _numba_requested() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


try:
    if not _numba_requested():
        raise ImportError("disabled by environment")
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    _numba = None
    HAVE_NUMBA = False


def njit(fn):
    """Compile ``fn`` with numba when enabled, otherwise return it unchanged."""
    if HAVE_NUMBA:
        return _numba.njit(cache=True)(fn)
    return fn


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"

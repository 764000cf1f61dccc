"""Numba switch.

Set ``RKHS_LSQ_NUMBA=0`` before import to run every kernel on the pure
numpy path. Both paths are always importable so they can be compared.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("RKHS_LSQ_NUMBA", "1").strip().lower()

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")


def njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, identity decorator otherwise.

    Always compiles when numba exists; ``USE_NUMBA`` only decides which
    implementation the dispatchers in ``_kernels`` hand out.
    """
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrapper(f):
            return f

        return wrapper
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)

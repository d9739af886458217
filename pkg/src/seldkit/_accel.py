"""Numba switch for the hot kernels.

Kernels are compiled with ``numba.njit`` unless ``SELDKIT_DISABLE_NUMBA`` is
set to a non-empty value other than ``0``, or numba cannot be imported. In
that case every module falls back to its vectorised numpy implementation.
The flag is read once at import time.
"""

import os

_flag = os.environ.get("SELDKIT_DISABLE_NUMBA", "")
_disabled = _flag not in ("", "0")

try:
    if _disabled:
        raise ImportError
    import numba

    njit = numba.njit(cache=False, nogil=True)
    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False

    def njit(func):
        return func


def use_numba():
    """True when the numba kernels are active."""
    return HAVE_NUMBA

"""Numba switch.

Hot kernels are written twice: an ``@njit`` loop version and a vectorised
numpy version. ``EXPONENT_LAB_DISABLE_NUMBA=1`` (or a missing numba install)
selects the numpy path everywhere.
"""

from __future__ import annotations

import os

ENV_FLAG = "EXPONENT_LAB_DISABLE_NUMBA"


def _disabled_by_env() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _disabled_by_env()


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, otherwise the identity decorator.

    The decorated function is always compiled when numba exists, even with the
    env flag set, so the benchmark can compare both paths in one process.
    """
    if HAVE_NUMBA:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrapper(f):
        return f

    return wrapper


def pick(numba_impl, numpy_impl):
    return numba_impl if USE_NUMBA else numpy_impl

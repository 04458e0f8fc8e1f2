"""Kernel backend selection.

The hot loops in :mod:`distill_equiv.kernels` exist twice: a numba ``@njit``
version and a pure-numpy version. ``DISTILL_EQUIV_BACKEND`` picks one at
import time (``numba`` or ``numpy``); without the variable numba is used when
it imports cleanly.
"""

import os

ENV_VAR = "DISTILL_EQUIV_BACKEND"

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn


def _resolve(value):
    if value is None or value == "":
        return "numba" if HAS_NUMBA else "numpy"
    value = value.strip().lower()
    if value not in ("numba", "numpy"):
        raise RuntimeError(f"{ENV_VAR} must be 'numba' or 'numpy', got {value!r}")
    if value == "numba" and not HAS_NUMBA:
        raise RuntimeError(f"{ENV_VAR}=numba but numba is not importable")
    return value


BACKEND = _resolve(os.environ.get(ENV_VAR))
USE_NUMBA = BACKEND == "numba"

"""Kernel acceleration switch.

Hot loops are written in the numba-compatible subset of Python and decorated
with :func:`jit`.  When numba is importable and ``TWISTY_DISABLE_NUMBA`` is not
set, they are compiled with ``numba.njit``; otherwise the very same source runs
as plain Python/numpy.  Either way the undecorated function is reachable as
``kernel.py_func`` so tests and benchmarks can compare both paths in-process.
"""
import os

_FLAG = os.environ.get("TWISTY_DISABLE_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG in ("1", "true", "yes", "on")

try:
    if NUMBA_DISABLED:
        raise ImportError
    import numba
except ImportError:
    numba = None

USE_NUMBA = numba is not None


def jit(fn=None, **options):
    options.setdefault("cache", True)

    def wrap(f):
        if USE_NUMBA:
            return numba.njit(**options)(f)
        f.py_func = f
        return f

    if fn is not None:
        return wrap(fn)
    return wrap


def backend_name():
    return "numba" if USE_NUMBA else "python"

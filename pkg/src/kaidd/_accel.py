"""Numba switch.

Set ``KAIDD_DISABLE_NUMBA=1`` before import to run every hot kernel through
its pure-numpy / pure-python path instead of the jitted one.
"""
import os

USE_NUMBA = os.environ.get("KAIDD_DISABLE_NUMBA", "0").lower() not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if USE_NUMBA:
    def jit(func):
        return numba.njit(cache=True, nogil=True)(func)
else:
    def jit(func):
        return func

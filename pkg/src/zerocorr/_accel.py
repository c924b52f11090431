"""Optional numba acceleration.

Set ``ZEROCORR_DISABLE_JIT=1`` to run every kernel as plain Python/numpy.
The flag is read once, at import time.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

JIT_DISABLED = os.environ.get("ZEROCORR_DISABLE_JIT", "").strip().lower() not in ("", "0", "false", "no")
USE_NUMBA = numba is not None and not JIT_DISABLED


def njit(fn=None, **options):
    """``numba.njit(cache=True, nogil=True)`` or the identity when JIT is off."""
    if not USE_NUMBA:
        return fn if fn is not None else (lambda f: f)
    options.setdefault("cache", True)
    options.setdefault("nogil", True)
    if fn is None:
        return lambda f: numba.njit(**options)(f)
    return numba.njit(**options)(fn)


def backend() -> str:
    return "numba" if USE_NUMBA else "numpy"

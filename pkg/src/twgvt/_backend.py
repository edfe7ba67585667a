"""Select the compiled kernels when built, else the pure-Python fallback.

Set ``TWGVT_PURE=1`` to force the fallback.
"""

import os

from . import _fallback

if os.environ.get("TWGVT_PURE"):
    AtomicInt = _fallback.AtomicInt
    sweep = _fallback.sweep
    BACKEND = "python"
else:
    try:
        from ._speedups import AtomicInt, sweep  # noqa: F401
        BACKEND = "cython"
    except ImportError:
        AtomicInt = _fallback.AtomicInt
        sweep = _fallback.sweep
        BACKEND = "python"

"""Backend switch for the compiled kernels.

Hot loops are written twice: once as scalar loops compiled with numba, once
as vectorized numpy.  ``KKTSCHUR_DISABLE_JIT=1`` (or a missing numba install)
selects the numpy path at import time.  Both paths stay importable so the
benchmarks can time them side by side.
"""

import os

_flag = os.environ.get("KKTSCHUR_DISABLE_JIT", "").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _disabled


def njit(func):
    """Compile ``func`` in nopython mode, or return it unchanged without numba."""
    if numba is None:  # pragma: no cover
        return func
    return numba.njit(cache=True)(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"

"""Kernel backend selection.

Set ``WARFARIN_BANDITS_BACKEND=numpy`` to force the pure-numpy kernels; the
default is ``numba`` whenever numba imports cleanly.
"""
import os

ENV_FLAG = "WARFARIN_BANDITS_BACKEND"

_requested = os.environ.get(ENV_FLAG, "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"{ENV_FLAG} must be 'numba' or 'numpy', got {_requested!r}")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is optional
    _numba = None

USE_NUMBA = _requested == "numba" and _numba is not None
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(fn):
    """Compile ``fn`` in nopython mode, or return it untouched on the numpy backend.

    fastmath stays off: replays must be bitwise reproducible.
    """
    if not USE_NUMBA:
        return fn
    return _numba.njit(cache=True, nogil=True)(fn)

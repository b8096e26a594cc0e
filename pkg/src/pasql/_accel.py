"""Backend selection for the hot loops.

Kernels are compiled with numba when it is importable and the environment
variable ``PASQL_BACKEND`` is unset or ``numba``.  Setting
``PASQL_BACKEND=numpy`` forces the pure-numpy/Python fallback, which produces
bitwise-identical results (both paths consume the same pre-drawn uniforms).
"""
import os

_requested = os.environ.get("PASQL_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"PASQL_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

NUMBA_AVAILABLE = _numba is not None
USE_NUMBA = NUMBA_AVAILABLE and _requested == "numba"


def njit(func):
    """Compile ``func`` in nopython mode, or return it untouched on the numpy backend."""
    if not NUMBA_AVAILABLE:
        return func
    return _numba.njit(cache=True)(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"

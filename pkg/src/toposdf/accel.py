"""Toggle between numba-jitted kernels and their pure-python fallbacks.

The hot loops (persistence sweep, kd-tree queries, marching cubes) are written
once as plain functions over numpy arrays and wrapped with ``numba.njit`` when
acceleration is available.  The environment variable ``TOPOSDF_NUMBA`` selects
the path:

* ``1`` / ``true``  force numba (ImportError if numba is missing)
* ``0`` / ``false`` force the pure-python fallback
* unset / ``auto``  use numba when importable
"""

import os


def _resolve_flag():
    raw = os.environ.get("TOPOSDF_NUMBA", "auto").strip().lower()
    if raw in ("1", "true", "on", "yes"):
        return True
    if raw in ("0", "false", "off", "no"):
        return False
    return None


_FLAG = _resolve_flag()
NUMBA_ENABLED = False

if _FLAG is not False:
    try:
        from numba import njit as _njit
        NUMBA_ENABLED = True
    except ImportError:
        if _FLAG is True:
            raise
        NUMBA_ENABLED = False


if NUMBA_ENABLED:
    def jit_kernel(func):
        return _njit(cache=True)(func)
else:
    def jit_kernel(func):
        return func


def python_impl(func):
    """Return the pure-python implementation behind a (possibly jitted) kernel."""
    return getattr(func, "py_func", func)

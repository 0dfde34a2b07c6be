"""Backend selection for the hot numeric kernels.

Set ``GATEDALPHA_NUMBA=0`` in the environment before import to force the
pure-numpy code paths.  When numba is not installed the numpy path is used
regardless of the flag.
"""

import functools
import os

_FLAG = os.environ.get("GATEDALPHA_NUMBA", "1").strip().lower()

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is optional
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")

if HAVE_NUMBA:
    jit = functools.partial(numba.njit, cache=True, nogil=True)
else:  # pragma: no cover

    def jit(fn=None, **_kwargs):
        if fn is None:
            return lambda f: f
        return fn


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"

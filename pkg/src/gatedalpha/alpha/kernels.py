"""Dispatch to the numba or numpy kernel set (see ``gatedalpha._accel``)."""

import numpy as np

from .. import _accel
from . import _kernels_numpy

TS_KERNELS = (
    "ts_sum",
    "ts_product",
    "ts_min",
    "ts_max",
    "ts_argmin",
    "ts_argmax",
    "ts_rank",
    "ts_stddev",
    "decay_linear",
)
PAIR_KERNELS = ("correlation", "covariance")
ROW_KERNELS = ("rank_rows", "scale_rows", "group_demean")
ALL_KERNELS = TS_KERNELS + PAIR_KERNELS + ROW_KERNELS


def backend(name: str | None = None):
    """Return the kernel module for ``name`` ('numba' or 'numpy'; default: active backend)."""
    name = name or _accel.backend_name()
    if name == "numba":
        if not _accel.HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        from . import _kernels_numba

        return _kernels_numba
    if name == "numpy":
        return _kernels_numpy
    raise ValueError(f"unknown kernel backend {name!r}")


_active = backend()


def get(name: str):
    return getattr(_active, name)


def contiguous(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float64)

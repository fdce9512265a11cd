"""Backend selection for the hot order-statistic kernels.

The compiled extension is used when it imports; otherwise the numpy version.
Set ``L0ROBUST_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKENDS = {"python": _kernels_py}

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None
else:
    BACKENDS["cython"] = _compiled

if _compiled is not None and not os.environ.get("L0ROBUST_PURE_PYTHON"):
    BACKEND = "cython"
else:
    BACKEND = "python"

partition_sums = BACKENDS[BACKEND].partition_sums


def get_backend(name):
    """Return the kernel module registered under ``name`` ("cython" or "python")."""
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available") from None

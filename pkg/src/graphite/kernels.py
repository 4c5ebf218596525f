"""Backend selection for the hot kernels.

The compiled module ``graphite._kernels`` is used when it was built; set
``GRAPHITE_KERNELS=python`` to force the numpy fallback.
"""
import os

from graphite import _kernels_py

BACKENDS = {"python": _kernels_py}

try:
    from graphite import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None
else:
    BACKENDS["cython"] = _compiled

if os.environ.get("GRAPHITE_KERNELS", "").lower() == "python" or _compiled is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

_impl = BACKENDS[BACKEND]

spmm = _impl.spmm
spmm_backward = _impl.spmm_backward
rows_intersect = _impl.rows_intersect
rows_dot = _impl.rows_dot
cooccurrence_pairs = _impl.cooccurrence_pairs


def get(name):
    """Return the kernel module for backend ``name`` ("cython" or "python")."""
    return BACKENDS[name]

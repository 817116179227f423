"""Backend selection for the hot loops.

The compiled module is used when it imports; set
``SPHERE_BUBBLING_KERNELS=python`` to force the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("SPHERE_BUBBLING_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _pykernels

weighted_sum = _impl.weighted_sum
gegenbauer_table = _impl.gegenbauer_table
zonal_synthesis = _impl.zonal_synthesis

__all__ = ["BACKEND", "weighted_sum", "gegenbauer_table", "zonal_synthesis"]

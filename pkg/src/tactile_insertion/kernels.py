"""Backend selection for the geometry hot kernels.

The compiled extension is used when it is importable; setting the
environment variable ``TACTILE_INSERTION_PURE_PYTHON=1`` forces the numpy
fallback. ``BACKEND`` names the active implementation.
"""
import os

from . import _kernels_py

if os.environ.get("TACTILE_INSERTION_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

polygon_signed_distance = _impl.polygon_signed_distance
ellipse_signed_distance = _impl.ellipse_signed_distance

__all__ = ["BACKEND", "polygon_signed_distance", "ellipse_signed_distance"]

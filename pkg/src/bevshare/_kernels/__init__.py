"""Kernel backend selection.

The package ships a compiled extension for the three inner-loop
kernels (per-cell attention, line-of-sight tests, rotated-box IoU)
plus a vectorized numpy fallback.  ``BEVSHARE_KERNELS=python`` forces
the fallback; ``BEVSHARE_KERNELS=cython`` requires the extension and
raises if it is missing.  Unset, the extension is used when it
imports.
"""

from __future__ import annotations

import os

from . import numpy_impl

_choice = os.environ.get("BEVSHARE_KERNELS", "").strip().lower()
if _choice not in ("", "cython", "python"):
    raise ValueError(
        "BEVSHARE_KERNELS must be 'cython' or 'python', got %r" % (_choice,)
    )

if _choice == "python":
    _impl = numpy_impl
    BACKEND = "python"
else:
    try:
        from . import _cykernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _choice == "cython":
            raise
        _impl = numpy_impl
        BACKEND = "python"

fuse_cells = _impl.fuse_cells
visibility = _impl.visibility
quad_iou = _impl.quad_iou


def get_backend() -> str:
    """Name of the kernel backend active in this process."""
    return BACKEND

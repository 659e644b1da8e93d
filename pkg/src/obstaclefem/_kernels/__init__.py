"""Kernel backend selection.

The compiled Cython kernels are preferred when importable; otherwise the
NumPy implementation is used.  Set ``OBSTACLEFEM_KERNELS=py`` or ``=c`` to
force a backend (``c`` raises if the extension is missing).
"""

import os

_requested = os.environ.get("OBSTACLEFEM_KERNELS", "auto").lower()

if _requested not in ("auto", "c", "py"):
    raise ValueError(f"OBSTACLEFEM_KERNELS={_requested!r} (use auto, c or py)")

if _requested in ("auto", "c"):
    try:
        from . import _ckernels as _impl
        BACKEND = "c"
    except ImportError:
        if _requested == "c":
            raise
        from . import pykernels as _impl
        BACKEND = "py"
else:
    from . import pykernels as _impl
    BACKEND = "py"

cell_matrices = _impl.cell_matrices
estimator_cells = _impl.estimator_cells
error_cells = _impl.error_cells

__all__ = ["BACKEND", "cell_matrices", "estimator_cells", "error_cells"]

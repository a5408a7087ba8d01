"""Kernel backend selection.

The compiled Cython core is used when importable; otherwise the
pure-Python reference takes over. Both implement the same documented
operation order and produce bitwise-identical results (see
``_kernels_py``), so the choice affects speed only. Force a backend with
SCALEDVR_KERNELS=compiled|pure.
"""

import os


def _load():
    forced = os.environ.get("SCALEDVR_KERNELS", "").strip().lower()
    if forced in ("pure", "python", "py"):
        from . import _kernels_py

        return _kernels_py
    if forced in ("compiled", "cython", "c"):
        from . import _kernels  # ImportError here means the extension is not built

        return _kernels
    if forced:
        raise ValueError(f"SCALEDVR_KERNELS must be 'compiled' or 'pure', got {forced!r}")
    try:
        from . import _kernels

        return _kernels
    except ImportError:
        from . import _kernels_py

        return _kernels_py


kernels = _load()


def backend_name() -> str:
    """'compiled' or 'pure', whichever is active."""
    return kernels.BACKEND

"""Select the time-stepping kernels: compiled if available, else pure numpy.

Setting ``CRITWAVE_PURE_PYTHON=1`` forces the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py


def _load_compiled():
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


_compiled = _load_compiled()

if _compiled is not None and os.environ.get("CRITWAVE_PURE_PYTHON", "") in ("", "0"):
    kernels = _compiled
    BACKEND = "cython"
else:
    kernels = _kernels_py
    BACKEND = "python"


def available_backends() -> dict:
    """Name -> kernel module for every backend importable in this build."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out

"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the pure-Python
twin. Setting ``LIKERTMINE_PURE_PYTHON=1`` forces the fallback.
"""

import os
import warnings

from . import _pykernels

_FORCE_PURE = os.environ.get("LIKERTMINE_PURE_PYTHON", "").strip() not in ("", "0")

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and not _FORCE_PURE:
    impl = _compiled
    BACKEND = "compiled"
else:
    impl = _pykernels
    BACKEND = "python"
    if _compiled is None and not _FORCE_PURE:
        warnings.warn(
            "likertmine: compiled kernels unavailable, using the pure-Python fallback",
            RuntimeWarning,
            stacklevel=2,
        )


def get_backend(name=None):
    """Return the kernel module for ``name`` ('compiled' or 'python')."""
    if name is None:
        return impl
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available_backends():
    return ["compiled", "python"] if _compiled is not None else ["python"]

"""Selects the network evaluation kernels at import time.

The compiled Cython module is used when it was built; otherwise, or when
``PETROFLOW_PURE_PYTHON=1`` is set, the numpy implementation is used.
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def get_backend(name: str | None = None):
    """Return a kernel module: ``"compiled"``, ``"python"`` or the default."""
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available; build the extension first")
        return _compiled
    if name is not None:
        raise ValueError(f"unknown kernel backend {name!r}")
    return default


if _compiled is not None and os.environ.get("PETROFLOW_PURE_PYTHON", "") not in ("1", "true", "yes"):
    default = _compiled
    BACKEND = "compiled"
else:
    default = _kernels_py
    BACKEND = "python"

HAVE_COMPILED = _compiled is not None

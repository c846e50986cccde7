"""Selects the compiled filtering kernels, falling back to pure Python.

Set ``REGIMESWITCH_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
forward = _kernels_py.forward
backward = _kernels_py.backward

if os.environ.get("REGIMESWITCH_PURE_PYTHON", "0") not in ("1", "true", "True"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        forward = _compiled.forward
        backward = _compiled.backward

__all__ = ["BACKEND", "forward", "backward"]

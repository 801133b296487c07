"""Pick the kernel implementation at import time.

The compiled extension is used when it imports; otherwise the pure-Python twin
takes over. ``REPFWD_BACKEND=python`` forces the fallback, ``REPFWD_BACKEND=c``
makes a missing extension an error.
"""
from __future__ import annotations

import importlib
import os
import warnings

_NAMES = {"c": "repfwd._ckernels", "python": "repfwd._pykernels"}


def get_kernels(name: str | None = None):
    """Return the kernel module called ``name`` ("c" or "python"), or the default one."""
    if name is None:
        return kernels
    if name not in _NAMES:
        raise ValueError(f"unknown backend {name!r}, expected one of {sorted(_NAMES)}")
    return importlib.import_module(_NAMES[name])


def _select():
    wanted = os.environ.get("REPFWD_BACKEND", "").strip().lower()
    if wanted == "python":
        return get_kernels("python"), "python"
    try:
        return importlib.import_module(_NAMES["c"]), "c"
    except ImportError:
        if wanted == "c":
            raise
        warnings.warn(
            "compiled kernels unavailable, falling back to the pure-Python backend",
            RuntimeWarning,
            stacklevel=3,
        )
        return importlib.import_module(_NAMES["python"]), "python"


kernels, BACKEND = _select()

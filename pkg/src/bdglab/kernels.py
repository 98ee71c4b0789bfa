"""Kernel backend selection.

The compiled ``_kernels`` extension is preferred; the pure-numpy
``_fallback`` is used when the extension is not built.  Set
``BDGLAB_BACKEND=python`` to force the fallback, or ``BDGLAB_BACKEND=cython``
to make a missing extension an import error.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _fallback


def _load_compiled() -> ModuleType | None:
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


_compiled = _load_compiled()
_requested = os.environ.get("BDGLAB_BACKEND", "").strip().lower()

if _requested == "python":
    _impl: ModuleType = _fallback
elif _requested == "cython" and _compiled is None:
    raise ImportError("BDGLAB_BACKEND=cython but bdglab._kernels is not built")
else:
    _impl = _compiled if _compiled is not None else _fallback

BACKEND = "cython" if _impl is _compiled else "python"


def backend_module(name: str) -> ModuleType:
    """Return the kernel module for ``name`` ('cython' or 'python')."""
    if name == "python":
        return _fallback
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    return ["cython", "python"] if _compiled is not None else ["python"]


philox4x32 = _impl.philox4x32
standard_normals = _impl.standard_normals
brownian_sup_abs = _impl.brownian_sup_abs

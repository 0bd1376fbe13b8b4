"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; setting the
environment variable PCGRBM_PURE_PYTHON (to anything non-empty) forces the
NumPy fallback. Both backends expose jacobi_eigh, ap_iterate, and
constrained_assign with identical contracts.
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("PCGRBM_PURE_PYTHON"):
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_py


def backend_name() -> str:
    return kernels.BACKEND


def available_backends() -> dict[str, object]:
    """Importable kernel modules by name; used by tests and benchmarks."""
    out: dict[str, object] = {"python": _kernels_py}
    try:
        from . import _kernels

        out["compiled"] = _kernels
    except ImportError:
        pass
    return out

"""Kernel selection: compiled extension when importable, pure Python otherwise.

Set ``MCGEO_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("MCGEO_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

cheeger_scan = _impl.cheeger_scan
sampler_chunk = _impl.sampler_chunk


def backends() -> dict:
    """All importable backends by name, for benchmarks and cross-checks."""
    out = {"python": _fallback}
    try:
        from . import _speedups

        out["cython"] = _speedups
    except ImportError:
        pass
    return out

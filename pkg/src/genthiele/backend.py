"""Select the compiled kernels when built, else the pure-Python fallback.

Set ``GENTHIELE_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernels


def _compiled() -> ModuleType | None:
    try:
        from . import _kernels
    except ImportError:
        return None
    return _kernels


def load(name: str | None = None) -> ModuleType:
    """Return the kernel module ``"cython"``, ``"python"`` or the default choice."""
    if name == "python":
        return _pykernels
    compiled = _compiled()
    if name == "cython":
        if compiled is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return compiled
    if os.environ.get("GENTHIELE_PURE_PYTHON") or compiled is None:
        return _pykernels
    return compiled


kernels = load()


def available() -> list[str]:
    return ["python"] + (["cython"] if _compiled() is not None else [])


def max_workers() -> int:
    """Worker cap from ``GENTHIELE_MAX_WORKERS`` (default: CPU count)."""
    env = os.environ.get("GENTHIELE_MAX_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1

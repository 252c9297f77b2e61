"""Backend selection for the simulation core.

The compiled kernel is used when importable; otherwise the NumPy fallback.
Set FORMLEARN_BACKEND=python or =compiled to force a choice (forcing
`compiled` raises if the extension is missing).
"""
from __future__ import annotations

import os

from . import pyref
from .spec import EngineSpec  # noqa: F401

try:
    from . import _core  # type: ignore[attr-defined]

    HAVE_COMPILED = True
except ImportError:
    _core = None
    HAVE_COMPILED = False


def backend(name: str | None = None):
    """Return the backend module (`run`, `derivative`, `BACKEND_NAME`)."""
    name = name or os.environ.get("FORMLEARN_BACKEND", "auto")
    if name in ("auto", ""):
        return _core if HAVE_COMPILED else pyref
    if name == "python":
        return pyref
    if name in ("compiled", "c"):
        if not HAVE_COMPILED:
            raise RuntimeError("compiled backend requested but extension not built")
        return _core
    raise ValueError(f"unknown backend {name!r}")

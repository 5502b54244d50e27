"""Kernel backend selection.

The compiled extension is used when importable; setting
``ANISOLAB_BACKEND=python`` (or calling :func:`use`) forces the numpy
fallback. Both expose the same functions on ghost-padded 3-d buffers.
"""
from __future__ import annotations

import importlib
import os

from . import _pykernels

_current = None


def available() -> list[str]:
    names = ["python"]
    try:
        importlib.import_module("anisolab.solver._core")
        names.insert(0, "compiled")
    except ImportError:
        pass
    return names


def load(name: str | None = None):
    """Return the kernel module for ``name`` (``auto``, ``compiled`` or ``python``)."""
    name = (name or os.environ.get("ANISOLAB_BACKEND", "auto")).lower()
    if name == "python":
        return _pykernels
    try:
        return importlib.import_module("anisolab.solver._core")
    except ImportError:
        if name == "compiled":
            raise
        return _pykernels


def use(name: str | None = None):
    global _current
    _current = load(name)
    return _current


def kernels():
    return _current if _current is not None else use()


def name() -> str:
    return kernels().BACKEND

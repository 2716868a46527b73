"""Kernel backend selection.

The compiled extension is preferred; the pure-Python module is used when
it cannot be imported or when ``NMCONTROL_PURE_PYTHON`` is set to a
non-empty value other than ``0``.
"""
import os

from . import _pykernels

_force_python = os.environ.get("NMCONTROL_PURE_PYTHON", "") not in ("", "0")

if _force_python:
    kernels = _pykernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:  # extension not built
        kernels = _pykernels

COMPILED = kernels is not _pykernels
BACKEND = "cython" if COMPILED else "python"

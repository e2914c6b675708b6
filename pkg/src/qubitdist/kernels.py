"""Kernel selection.

Imports the compiled substitution kernel when the extension was built and
falls back to the pure-Python version otherwise. Set
``QUBITDIST_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _substitute_py
from ._substitute_py import _mult_factor as mult_factor

BACKEND = "python"
substitute = _substitute_py.substitute

if os.environ.get("QUBITDIST_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._substitute import substitute  # noqa: F811
    except ImportError:
        pass
    else:
        BACKEND = "cython"

python_substitute = _substitute_py.substitute

__all__ = ["BACKEND", "substitute", "python_substitute", "mult_factor"]

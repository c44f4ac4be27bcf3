"""Select the integrator kernel: compiled extension if built, numpy otherwise."""
from __future__ import annotations

from . import _kernel_py

try:
    from . import _core
except ImportError:  # extension not built on this install
    _core = None

HAVE_COMPILED = _core is not None
DEFAULT_KERNEL = "compiled" if HAVE_COMPILED else "python"


def get_kernel(name: str = "auto"):
    """Return the kernel module for ``name`` in {auto, compiled, python}."""
    if name == "auto":
        return _core if HAVE_COMPILED else _kernel_py
    if name == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernel is not available in this install")
        return _core
    if name == "python":
        return _kernel_py
    raise ValueError(f"unknown kernel {name!r}")

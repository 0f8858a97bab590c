"""Selection of the propagation kernel backend.

The compiled extension (trapsim._kernel, built from _kernel.pyx) and the
pure-NumPy module (trapsim._kernel_py) implement the same propagate()
contract.  The compiled one is preferred when importable; set the
environment variable TRAPSIM_PURE_PY to any non-empty value to force the
NumPy fallback (useful for benchmarking and debugging).
"""

import os

from . import _kernel_py

if os.environ.get("TRAPSIM_PURE_PY"):
    _impl = _kernel_py
    _name = "python"
else:
    try:
        from . import _kernel as _compiled

        _impl = _compiled
        _name = "compiled"
    except ImportError:
        _impl = _kernel_py
        _name = "python"


def kernel_name() -> str:
    """Which backend is active: "compiled" or "python"."""
    return _name


def propagate(*args, **kwargs):
    """Dispatch to the active backend's propagate()."""
    return _impl.propagate(*args, **kwargs)

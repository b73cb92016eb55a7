"""Pick the compiled kernels when available, else the numpy fallback.

Set ``VDERM_PURE_PYTHON=1`` to force the fallback (used by the benchmark and
by the backend-equivalence tests).
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

COMPILED = _ckernels is not None


def get(name=None):
    """Return a kernel module by name (``"cython"`` or ``"python"``)."""
    if name is None:
        name = "python" if (os.environ.get("VDERM_PURE_PYTHON") or not COMPILED) else "cython"
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise ImportError("vderm._ckernels is not built; reinstall with Cython available")
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")


kernels = get()

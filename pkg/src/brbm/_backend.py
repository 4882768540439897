"""Kernel backend selection.

The compiled extension is preferred when it imports; the NumPy fallback is
always available.  Set BRBM_KERNELS=py (or =c) to force a choice, e.g. for
the benchmark or to debug a suspected extension issue.
"""

import os

from . import _kernels_py

_forced = os.environ.get("BRBM_KERNELS", "").strip().lower()

if _forced in ("py", "python", "numpy"):
    kernels = _kernels_py
    BACKEND = "python"
elif _forced in ("c", "cython", "ext", "compiled"):
    from . import _kernels as kernels  # noqa: F401  (ImportError is the point)

    BACKEND = "cython"
else:
    try:
        from . import _kernels as kernels

        BACKEND = "cython"
    except ImportError:
        kernels = _kernels_py
        BACKEND = "python"


def get_kernels(name=None):
    """Return a kernel module by name ('cython' or 'python'); default: active."""
    if name is None:
        return kernels
    if name in ("python", "py", "numpy"):
        return _kernels_py
    if name in ("cython", "c", "ext", "compiled"):
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")

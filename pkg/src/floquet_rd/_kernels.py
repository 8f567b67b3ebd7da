"""Backend selection for the hot kernels.

The compiled ``_ext`` module is used when it imports; otherwise the NumPy
fallback in ``_pykernels`` takes over. Setting ``FLOQUET_RD_BACKEND=python``
forces the fallback.
"""

import os

from . import _pykernels

_forced = os.environ.get("FLOQUET_RD_BACKEND", "").strip().lower()

_ext = None
if _forced != "python":
    try:
        from . import _ext  # noqa: F811
    except ImportError:
        _ext = None

if _ext is not None:
    BACKEND = "cython"
    _impl = _ext
else:
    BACKEND = "python"
    _impl = _pykernels

dopri_example = _impl.dopri_example
reaction_rk4_example = _impl.reaction_rk4_example


def available_backends():
    """Mapping of backend name to kernel module, for tests and benchmarks."""
    out = {"python": _pykernels}
    if _ext is not None:
        out["cython"] = _ext
    return out

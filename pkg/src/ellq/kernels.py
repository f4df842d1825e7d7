"""Backend selection for the hot kernels.

The compiled ``ellq._kernels`` module is preferred; the numpy implementation in
``ellq._kernels_py`` is used when the extension is unavailable or when the
environment variable ``ELLQ_PURE_PYTHON`` is set to a non-empty value.
"""
import os

from ellq import _kernels_py

try:
    from ellq import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled

if _compiled is not None and not os.environ.get("ELLQ_PURE_PYTHON"):
    BACKEND = "cython"
else:
    BACKEND = "python"


def available_backends():
    return sorted(_BACKENDS)


def get_backend(name=None):
    """Return the kernel module for ``name`` (default: the selected backend)."""
    name = BACKEND if name is None else name
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"kernel backend {name!r} unavailable; have {available_backends()}"
        ) from None

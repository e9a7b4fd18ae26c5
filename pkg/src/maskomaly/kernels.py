"""Kernel backend selection.

The compiled extension is preferred when importable; the NumPy module is
the fallback. Both expose the same functions with bit-identical results,
checked by the test suite. Set MASKOMALY_FORCE_FALLBACK=1 to pretend the
extension is absent.
"""

import os

from . import _kernels_py

_BACKENDS = {"fallback": _kernels_py}

if not os.environ.get("MASKOMALY_FORCE_FALLBACK"):
    try:
        from . import _kernels as _compiled

        _BACKENDS["compiled"] = _compiled
    except ImportError:
        pass

DEFAULT_BACKEND = "compiled" if "compiled" in _BACKENDS else "fallback"


def available_backends() -> tuple:
    return tuple(sorted(_BACKENDS))


def active_backend() -> str:
    return DEFAULT_BACKEND


def get_backend(name: str | None = None):
    """Return the kernel module for `name` (active backend when None)."""
    if name is None:
        name = DEFAULT_BACKEND
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}, available: {available_backends()}") from None

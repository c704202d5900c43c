"""Numeric core selection.

The compiled extension is preferred when importable; otherwise the NumPy
reference implementation is used. `BIEINV_BACKEND=numpy|compiled` forces a
choice (`compiled` raises if the extension is missing rather than silently
degrading).
"""

import os

from . import _core_py
from .errors import ConfigurationError

_REQUESTED = os.environ.get("BIEINV_BACKEND", "").strip().lower()
if _REQUESTED not in ("", "numpy", "compiled"):
    raise ConfigurationError(
        f"unknown BIEINV_BACKEND value {_REQUESTED!r} (use numpy or compiled)")


def _load():
    if _REQUESTED == "numpy":
        return _core_py, "numpy"
    try:
        from . import _core
    except ImportError:
        if _REQUESTED == "compiled":
            raise ConfigurationError(
                "BIEINV_BACKEND=compiled but the compiled extension is not available")
        return _core_py, "numpy"
    return _core, "compiled"


core, BACKEND = _load()


def get_core(name):
    """Fetch a specific backend (parity tests, benchmarks)."""
    if name == "numpy":
        return _core_py
    if name == "compiled":
        from . import _core
        return _core
    raise ConfigurationError(f"unknown backend {name!r}")


def available_backends():
    out = ["numpy"]
    try:
        from . import _core  # noqa: F401
        out.append("compiled")
    except ImportError:
        pass
    return out

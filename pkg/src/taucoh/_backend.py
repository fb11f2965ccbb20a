"""Kernel backend selection.

The per-frame hot kernels exist twice: a Cython extension
(``taucoh._kernels``) and a NumPy fallback (``taucoh._kernels_py``). The
compiled module is preferred when importable; set ``TAUCOH_BACKEND=python``
or ``TAUCOH_BACKEND=compiled`` to force a choice.
"""

import logging
import os

from . import _kernels_py
from .errors import ConfigError

logger = logging.getLogger(__name__)

_COMPILED = None
try:
    from . import _kernels as _COMPILED  # type: ignore[no-redef]
except ImportError:
    logger.debug("compiled kernels unavailable, using the NumPy fallback")


def available_backends():
    """Names of importable kernel backends."""
    names = ["python"]
    if _COMPILED is not None:
        names.insert(0, "compiled")
    return names


def load(name=None):
    """Return the kernel module for ``name``.

    ``None`` resolves to the TAUCOH_BACKEND environment variable if set,
    otherwise to the compiled module when present and the fallback when not.
    """
    if name is None:
        name = os.environ.get("TAUCOH_BACKEND")
    if name is None:
        return _COMPILED if _COMPILED is not None else _kernels_py
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _COMPILED is None:
            raise ConfigError("compiled kernel backend requested but not built")
        return _COMPILED
    raise ConfigError(f"unknown kernel backend {name!r}")

"""Picks the compiled sweep kernel when available, else the pure-Python twin.

Set ``JASEN_PURE_PYTHON=1`` to force the fallback.
"""

import logging
import os

from . import _sweep_py

logger = logging.getLogger(__name__)

try:
    from . import _sweep as _compiled
except ImportError:  # extension not built
    _compiled = None


def get_sweep(name=None):
    """Return the sweep function for ``"cython"``, ``"python"`` or the default."""
    if name is None:
        name = BACKEND
    if name == "python":
        return _sweep_py.sweep
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernel jasen._sweep is not built")
        return _compiled.sweep
    raise ValueError(f"unknown backend {name!r}")


if os.environ.get("JASEN_PURE_PYTHON") or _compiled is None:
    BACKEND = "python"
    if _compiled is None:
        logger.debug("jasen._sweep not built; using pure-Python sweep")
else:
    BACKEND = "cython"

sweep = get_sweep(BACKEND)

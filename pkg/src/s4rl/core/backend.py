"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. ``S4RL_BACKEND=python`` forces the fallback, ``S4RL_BACKEND=ext``
makes a missing extension an import error.
"""

import contextlib
import logging
import os

from . import _kernels_py

log = logging.getLogger(__name__)

try:
    from . import _kernels as _kernels_ext
except ImportError:  # extension not built
    _kernels_ext = None

AVAILABLE = {"python": _kernels_py}
if _kernels_ext is not None:
    AVAILABLE["ext"] = _kernels_ext


def _initial():
    want = os.environ.get("S4RL_BACKEND", "").strip().lower()
    if want == "python":
        return "python"
    if want == "ext":
        if _kernels_ext is None:
            raise ImportError("S4RL_BACKEND=ext but s4rl.core._kernels is not built")
        return "ext"
    if want:
        raise ImportError(f"unknown S4RL_BACKEND {want!r}")
    return "ext" if _kernels_ext is not None else "python"


name = _initial()
kernels = AVAILABLE[name]
log.debug("s4rl kernel backend: %s", name)


def set_backend(which: str) -> None:
    global name, kernels
    if which not in AVAILABLE:
        raise ValueError(f"backend {which!r} unavailable (have {sorted(AVAILABLE)})")
    name = which
    kernels = AVAILABLE[which]


@contextlib.contextmanager
def using(which: str):
    prev = name
    set_backend(which)
    try:
        yield
    finally:
        set_backend(prev)

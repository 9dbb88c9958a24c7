"""Pick the kernel backend at import time.

The compiled ``_ckernels`` extension is used when it was built; otherwise
the numpy versions in ``_pykernels`` take over. Set ``OPGRAM_KERNELS`` to
``python`` or ``cython`` to force a choice.
"""
import math
import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    BACKENDS["cython"] = _ckernels


def get_backend(name=None):
    """Return a kernel module by name; ``None``/``"auto"`` means the default.

    A module already in :data:`BACKENDS` is passed through.
    """
    if name in (None, "auto"):
        return DEFAULT
    if name in BACKENDS.values():
        return name
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available (have {sorted(BACKENDS)})") from None


def _pick_default():
    wanted = os.environ.get("OPGRAM_KERNELS", "auto").lower()
    if wanted == "auto":
        return BACKENDS.get("cython", _pykernels)
    if wanted not in BACKENDS:
        raise ImportError(f"OPGRAM_KERNELS={wanted!r} but available backends are {sorted(BACKENDS)}")
    return BACKENDS[wanted]


DEFAULT = _pick_default()

_xlogx_cache = np.zeros(1)


def xlogx_table(n):
    """``k * log2(k)`` for k = 0..n, with 0 log 0 = 0."""
    global _xlogx_cache
    if len(_xlogx_cache) <= n:
        _xlogx_cache = np.array([0.0] + [k * math.log2(k) for k in range(1, n + 1)])
    return _xlogx_cache[: n + 1]

"""Slot-loop backend selection.

The compiled ``_ckernel`` is used when it was built; otherwise, or when
``AFRELAY_PURE_PYTHON`` is set, the pure-Python loop is used.
"""

import os

from . import _pykernel

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

BACKENDS = {"python": _pykernel.run_slots}
if _ckernel is not None:
    BACKENDS["cython"] = _ckernel.run_slots

if _ckernel is not None and not os.environ.get("AFRELAY_PURE_PYTHON"):
    BACKEND = "cython"
else:
    BACKEND = "python"

run_slots = BACKENDS[BACKEND]


def get_backend(name: str | None = None):
    if name is None:
        return run_slots
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} unavailable; have {sorted(BACKENDS)}") from None

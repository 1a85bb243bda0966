"""Kernel backend selection.

The compiled extension (`platestab._core`) is preferred when present; the
pure-Python twin (`platestab._pure`) is the fallback and the reference.
Set ``PLATESTAB_PURE=1`` to force the pure backend, e.g. to compare the
two or to debug kernel behaviour.  Both produce bit-identical results.
"""
from __future__ import annotations

import os

from . import _pure


def _select():
    if os.environ.get("PLATESTAB_PURE", "").strip() not in ("", "0"):
        return _pure, "pure"
    try:
        from . import _core
    except ImportError:
        return _pure, "pure"
    return _core, "compiled"


_impl, _name = _select()

run_closed_loop = _impl.run_closed_loop
fopdt_closed_p = _impl.fopdt_closed_p
fopdt_closed_pid = _impl.fopdt_closed_pid
fopdt_open_step = _impl.fopdt_open_step


def backend_name() -> str:
    """Which kernel implementation is active: 'compiled' or 'pure'."""
    return _name

"""Kernel dispatch.

The numba path is used when numba imports cleanly and the environment
variable ``LOGTROP_DISABLE_NUMBA`` is unset or ``0``; otherwise the pure
numpy path runs.  Both modules expose the same three functions.
"""

from __future__ import annotations

import os

from . import numpy_impl

BACKEND = "numpy"
_impl = numpy_impl

if os.environ.get("LOGTROP_DISABLE_NUMBA", "0") in ("", "0"):
    try:
        from . import numba_impl as _impl  # noqa: F811
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba missing
        _impl = numpy_impl

envelope_eval = _impl.envelope_eval
far_lse = _impl.far_lse
series_log_modulus = _impl.series_log_modulus

__all__ = ["BACKEND", "envelope_eval", "far_lse", "series_log_modulus"]

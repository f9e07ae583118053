"""Numeric kernel backend selection.

Two interchangeable backends implement the hot-path math: ``pure`` (plain
Python, always available) and ``_native`` (Cython). Both produce
bit-identical results; the compiled one is picked automatically when the
extension was built. Override with the TWINADAPT_KERNELS environment
variable: ``py`` forces pure Python, ``c`` requires the extension and
raises if it is missing.
"""

from __future__ import annotations

import os

from . import pure as _pure

_requested = os.environ.get("TWINADAPT_KERNELS", "auto").strip().lower()

if _requested not in ("auto", "py", "c"):
    raise ValueError(
        f"TWINADAPT_KERNELS must be 'auto', 'py' or 'c', got {_requested!r}"
    )

_backend = _pure
_backend_name = "py"

if _requested in ("auto", "c"):
    try:
        from . import _native as _compiled  # type: ignore[attr-defined]

        _backend = _compiled
        _backend_name = "c"
    except ImportError:
        if _requested == "c":
            raise ImportError(
                "TWINADAPT_KERNELS=c but the compiled kernel extension is "
                "not built; reinstall the package or use TWINADAPT_KERNELS=py"
            ) from None

evac_pressure = _backend.evac_pressure
evac_crossing_time = _backend.evac_crossing_time
nrmse = _backend.nrmse
event_deviation = _backend.event_deviation


def backend_name() -> str:
    """Name of the active backend: 'c' (compiled) or 'py' (pure Python)."""
    return _backend_name


__all__ = [
    "evac_pressure",
    "evac_crossing_time",
    "nrmse",
    "event_deviation",
    "backend_name",
]

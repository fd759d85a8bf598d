"""Warp kernel backend selection.

The compiled extension is preferred when present; a pure NumPy fallback with
identical semantics is used otherwise. Set ``MVSKIT_BACKEND`` to ``python``
or ``native`` to force a backend (``native`` raises if the extension is not
built); the default ``auto`` picks the fastest available one at import time.
"""

from __future__ import annotations

import os

from . import reference

_requested = os.environ.get("MVSKIT_BACKEND", "auto")
if _requested not in {"auto", "python", "native"}:
    raise ImportError(
        f"MVSKIT_BACKEND must be one of auto/python/native, got {_requested!r}"
    )

_impl = None
if _requested in ("auto", "native"):
    try:
        from . import _native as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "native":
            raise
        _impl = None
if _impl is None:
    _impl = reference

BACKEND = _impl.BACKEND_NAME
warp_image_raw = _impl.warp_image_raw


def available_backends() -> dict[str, object]:
    """Map backend name to its kernel module, for parity tests and benchmarks."""
    out = {"python": reference}
    try:
        from . import _native

        out["native"] = _native
    except ImportError:
        pass
    return out

"""Kernel backend selection.

The compiled extension is used when importable, the numpy fallback
otherwise. Set CENTERKIT_BACKEND=python or =native before import to force a
choice; forcing the native backend when it is not built raises ImportError.
"""

from __future__ import annotations

import os

from . import _fallback
from ._fallback import (  # re-exported so callers share one set of constants
    CLAMP_EPS,
    KERNEL_BCFL,
    KERNEL_FL,
    KERNEL_QFL,
    KERNEL_WBCE,
    KERNEL_WMSE,
)

_forced = os.environ.get("CENTERKIT_BACKEND", "").strip().lower()

if _forced == "python":
    _impl = _fallback
    BACKEND = "python"
elif _forced in ("", "native"):
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        if _forced == "native":
            raise ImportError(
                "CENTERKIT_BACKEND=native but the compiled extension is not built"
            ) from None
        _impl = _fallback
        BACKEND = "python"
else:
    raise ValueError(f"unknown CENTERKIT_BACKEND value {_forced!r}")

render_gc_grid = _impl.render_gc_grid
render_gaussian_grid = _impl.render_gaussian_grid
render_ellipse_grid = _impl.render_ellipse_grid
loss_map = _impl.loss_map
local_max_candidates = _impl.local_max_candidates
solve_lap = _impl.solve_lap

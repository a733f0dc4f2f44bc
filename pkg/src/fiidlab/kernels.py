"""Kernel backend selection.

The hot per-vertex loops (radius-r tree-ball tests, induced component
labelling, cycle enumeration) exist twice: a Cython extension and a pure
numpy/python fallback with identical semantics.  The compiled backend is
used when importable; set FIIDLAB_PURE=1 to force the fallback.
"""

import os

if os.environ.get("FIIDLAB_PURE", "0") not in ("", "0"):
    from . import _fallback as _impl
    BACKEND = "pure"
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        from . import _fallback as _impl
        BACKEND = "pure"

tree_ball_flags = _impl.tree_ball_flags
cycle_counts = _impl.cycle_counts
inset_components = _impl.inset_components

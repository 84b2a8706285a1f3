"""Hot numeric kernels with two interchangeable lanes.

The compiled Cython core is preferred when it built successfully; the pure
NumPy lane is the fallback. Set CROWDFLOW_PURE_PYTHON=1 to force the
fallback (useful for benchmarking and debugging).
"""

import os

from . import _pure

_force_pure = os.environ.get("CROWDFLOW_PURE_PYTHON", "").strip() not in ("", "0")

if _force_pure:
    _impl = _pure
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _pure
        BACKEND = "python"

build_track_scores = _impl.build_track_scores
build_group_kernel_scores = _impl.build_group_kernel_scores
clip_halfplane = _impl.clip_halfplane
polygon_area = _impl.polygon_area
solve_matching = _impl.solve_matching


def backend() -> str:
    """Name of the active kernel lane ("compiled" or "python")."""
    return BACKEND

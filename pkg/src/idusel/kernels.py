"""Backend selection for the hot loops.

The compiled extension is used when it was built; otherwise the NumPy
fallback is imported. Set ``IDUSEL_PURE_PYTHON=1`` to force the fallback.
"""
import os

if os.environ.get("IDUSEL_PURE_PYTHON", "") not in ("", "0"):
    from idusel import _pykernels as _impl
    BACKEND = "python"
else:
    try:
        from idusel import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        from idusel import _pykernels as _impl
        BACKEND = "python"

kmeans_assign = _impl.kmeans_assign
exp3_rollout = _impl.exp3_rollout

__all__ = ["BACKEND", "kmeans_assign", "exp3_rollout"]

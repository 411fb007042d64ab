"""Backend selection for the hot kernels.

The compiled extension is used when it imports cleanly; setting
``LAGUERRE_PURE_PYTHON=1`` forces the NumPy fallback.
"""
import os

from . import _pykernels as python_backend

compiled_backend = None
if os.environ.get("LAGUERRE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = active.BACKEND
MAX_HALVINGS = active.MAX_HALVINGS

counter_normals = active.counter_normals
pfq_series = active.pfq_series
bessel_i_series = active.bessel_i_series
struve_l_series = active.struve_l_series
eigen_step = active.eigen_step
eigen_paths = active.eigen_paths
gram_paths = active.gram_paths

"""Backend selection for the hot loops.

The compiled extension is used when it was built; setting ``QFD_PURE_PYTHON=1``
forces the numpy fallback (useful for benchmarking and debugging).
"""
import os

from . import _kernels_py

BACKEND = "python"
survival_series = _kernels_py.survival_series

if not os.environ.get("QFD_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        BACKEND = "cython"
        survival_series = _compiled.survival_series

BACKENDS = {"python": _kernels_py.survival_series}
if BACKEND == "cython":
    BACKENDS["cython"] = survival_series

# Above this size a BLAS matrix-vector product beats the naive compiled loop.
COMPILED_MAX_DIM = 40


def run_survival(U, psi_d, psi_in, n_max):
    import numpy as np

    U = np.ascontiguousarray(U, dtype=np.complex128)
    psi_d = np.ascontiguousarray(psi_d, dtype=np.complex128).ravel()
    psi_in = np.ascontiguousarray(psi_in, dtype=np.complex128).ravel()
    if U.shape[0] > COMPILED_MAX_DIM:
        return _kernels_py.survival_series(U, psi_d, psi_in, n_max)
    return survival_series(U, psi_d, psi_in, n_max)

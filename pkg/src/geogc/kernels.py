"""Backend selection for the propagation kernels.

The compiled extension is used when importable; set ``GEOGC_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("GEOGC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

normalized_csr = _impl.normalized_csr
csr_matmul = _impl.csr_matmul

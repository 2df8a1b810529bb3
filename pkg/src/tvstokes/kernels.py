"""Backend selection for the hot Chambolle kernels.

The compiled extension ``_ckernels`` is used when it is importable; otherwise
the numpy implementation in ``_kernels_py`` takes over.  Setting the
environment variable ``TVSTOKES_PURE_PYTHON=1`` forces the numpy path.
"""
import os

from . import _kernels_py
from ._kernels_py import NumericalDivergence

if os.environ.get("TVSTOKES_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.BACKEND
ir_chambolle = _impl.ir_chambolle
tfs_chambolle = _impl.tfs_chambolle
chambolle_update = _impl.chambolle_update
weighted_update = _impl.weighted_update

__all__ = ["BACKEND", "NumericalDivergence", "ir_chambolle", "tfs_chambolle",
           "chambolle_update", "weighted_update", "python_backend"]


def python_backend():
    """The numpy fallback module, for equivalence tests and benchmarks."""
    return _kernels_py

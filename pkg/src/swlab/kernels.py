"""Kernel backend selection: the compiled extension when it imports, numpy otherwise.

Set ``SWLAB_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

BACKEND = "numpy"
if os.environ.get("SWLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = None
else:
    _impl = None
if _impl is None:
    from . import _kernels_py as _impl

residual = _impl.residual
energy = _impl.energy
energy_grad = _impl.energy_grad

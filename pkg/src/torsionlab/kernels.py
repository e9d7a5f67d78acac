"""Backend dispatch for the hot kernels.

Prefers the compiled Cython extension, falls back to the NumPy module when
the extension is missing (source install without a compiler) or when the
environment variable TORSIONLAB_PURE_PYTHON is set to a non-empty value.
"""

import os

from . import _kernels_py

_impl = _kernels_py
_backend = "python"

if not os.environ.get("TORSIONLAB_PURE_PYTHON"):
    try:
        from . import _kernels_c

        _impl = _kernels_c
        _backend = "compiled"
    except ImportError:
        pass


def backend() -> str:
    """Name of the active backend: 'compiled' or 'python'."""
    return _backend


stiffness_triplets = _impl.stiffness_triplets
superlevel_areas = _impl.superlevel_areas
boundary_superlevel = _impl.boundary_superlevel
cg_csr = _impl.cg_csr

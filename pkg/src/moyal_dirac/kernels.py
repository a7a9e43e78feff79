"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``MOYAL_DIRAC_PURE`` is set to a non-empty value other
than ``0``) the NumPy fallback is used. ``BACKEND`` names the active one.
"""
import os

from . import _kernels_py

_force_pure = os.environ.get("MOYAL_DIRAC_PURE", "") not in ("", "0")

try:
    if _force_pure:
        raise ImportError("pure backend requested")
    from . import _kernels as _impl
    BACKEND = "compiled"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"

twist_accumulate = _impl.twist_accumulate
twisted_convolution = _impl.twisted_convolution
apply_mode_matrices = _impl.apply_mode_matrices

__all__ = ["BACKEND", "twist_accumulate", "twisted_convolution",
           "apply_mode_matrices"]

"""Inner-loop kernels, compiled when available.

The Cython extension ``_ckernels`` is preferred; the numpy module
``_pykernels`` is used if it is missing or if the environment variable
``MARKINSPECT_PURE_PYTHON`` is set to a non-empty value other than "0".
"""

import os

from . import _pykernels

_force_pure = os.environ.get("MARKINSPECT_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_pure:
        raise ImportError("pure-python kernels requested")
    from . import _ckernels as _backend

    BACKEND = "cython"
except ImportError:
    _backend = _pykernels
    BACKEND = "python"

haar_forward = _backend.haar_forward
haar_inverse = _backend.haar_inverse
block_dct = _backend.block_dct
block_coefficients = _backend.block_coefficients
shift_block_coefficients = _backend.shift_block_coefficients
round_luma_shift = _backend.round_luma_shift


def backends():
    """Mapping of every importable backend name to its module."""
    found = {"python": _pykernels}
    try:
        from . import _ckernels

        found["cython"] = _ckernels
    except ImportError:
        pass
    return found

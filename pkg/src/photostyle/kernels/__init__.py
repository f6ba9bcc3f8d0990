"""Hot compute kernels with a compiled core and a numpy fallback.

The Cython extension is preferred when it was built; otherwise the
numpy implementations are used. Set PHOTOSTYLE_FORCE_NUMPY=1 to force
the fallback (used by the parity tests and the benchmark).
"""

import os

from . import _numpy

if os.environ.get("PHOTOSTYLE_FORCE_NUMPY", "0") == "1":
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from . import _ext as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _numpy
        BACKEND = "numpy"

im2col3 = _impl.im2col3
col2im3 = _impl.col2im3
maxpool2_fwd = _impl.maxpool2_fwd
maxpool2_bwd = _impl.maxpool2_bwd
matting_values_slab = _impl.matting_values_slab


def backends():
    """Name -> module for every backend importable in this build."""
    found = {"numpy": _numpy}
    try:
        from . import _ext

        found["compiled"] = _ext
    except ImportError:
        pass
    return found

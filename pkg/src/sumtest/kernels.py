"""Hot-kernel dispatch: the compiled extension when importable, else numpy.

Set ``SUMTEST_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from sumtest import _kernels_py

if os.environ.get("SUMTEST_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from sumtest import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"

pb_pmf = _impl.pb_pmf
mixture_pb_pmf = _impl.mixture_pb_pmf
mixture_pb_grad = _impl.mixture_pb_grad
coordinate_sweep = _impl.coordinate_sweep

"""Backend dispatch for the numeric hot kernels.

The numba-compiled kernels are used by default. Set ``SEWNET_NO_NUMBA=1``
(or any non-empty value) to force the pure-numpy fallback; the fallback is
also selected automatically when numba is not importable. ``BACKEND`` names
the active implementation. Both backends produce matching results; see
``benchmarks/bench_backends.py`` for the speed comparison.
"""

from __future__ import annotations

import os

from . import _numpy

__all__ = [
    "BACKEND",
    "conv_forward",
    "conv_backward_input",
    "conv_backward_kernel",
    "cf_magnitude",
    "garch_filter",
    "hosking_fgn",
]

_impl = _numpy
BACKEND = "numpy"

if not os.environ.get("SEWNET_NO_NUMBA"):
    try:
        from . import _numba as _impl  # noqa: F811

        BACKEND = "numba"
    except ImportError:
        pass

conv_forward = _impl.conv_forward
conv_backward_input = _impl.conv_backward_input
conv_backward_kernel = _impl.conv_backward_kernel
cf_magnitude = _impl.cf_magnitude
garch_filter = _impl.garch_filter
hosking_fgn = _impl.hosking_fgn

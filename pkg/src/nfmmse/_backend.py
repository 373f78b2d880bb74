"""Kernel selection: compiled extension if importable, numpy otherwise.

Set ``NFMMSE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
steering_rows = _fallback.steering_rows

if os.environ.get("NFMMSE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        steering_rows = _kernels.steering_rows
        BACKEND = "cython"

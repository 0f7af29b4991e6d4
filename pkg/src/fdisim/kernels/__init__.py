"""Hot-loop kernels with a compiled core and a pure-NumPy fallback.

The Cython extension (fdisim.kernels._native) is used when it was built;
otherwise the NumPy implementations take over transparently.  Set
FDISIM_PURE_PYTHON=1 to force the fallback (used by the backend-comparison
benchmark and tests).  `BACKEND` records which one is active.
"""

from __future__ import annotations

import os

from . import pure

if os.environ.get("FDISIM_PURE_PYTHON", "").strip() in ("1", "true", "yes"):
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _native as _impl
        BACKEND = "native"
    except ImportError:
        _impl = pure
        BACKEND = "pure"

kf_predict = _impl.kf_predict
kf_update_pos = _impl.kf_update_pos
propagate_cv = _impl.propagate_cv
bearing_log_weights = _impl.bearing_log_weights
systematic_resample = _impl.systematic_resample
weighted_mean_cov = _impl.weighted_mean_cov

__all__ = [
    "BACKEND",
    "pure",
    "kf_predict",
    "kf_update_pos",
    "propagate_cv",
    "bearing_log_weights",
    "systematic_resample",
    "weighted_mean_cov",
]

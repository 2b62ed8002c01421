"""Backend dispatch for the numeric kernels.

RELAYSIM_BACKEND selects the implementation at import time:
  auto  (default) use numba when importable, else pure numpy
  numba require numba, raise if unavailable
  numpy force the pure-numpy reference path
"""

import os

from . import numpy_impl

_requested = os.environ.get("RELAYSIM_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"RELAYSIM_BACKEND must be one of auto/numba/numpy, got {_requested!r}"
    )

if _requested == "numpy":
    _impl = numpy_impl
    BACKEND = "numpy"
else:
    try:
        from . import numba_impl as _impl
        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        _impl = numpy_impl
        BACKEND = "numpy"

wrap_angles = _impl.wrap_angles
directional_gain_db = _impl.directional_gain_db
path_attenuation_db = _impl.path_attenuation_db
raycast_distances = _impl.raycast_distances
wca_reduce = _impl.wca_reduce
sonar_reduce = _impl.sonar_reduce
error_step_value = _impl.error_step_value
error_step_grid = _impl.error_step_grid


def backend_name() -> str:
    """Active kernel backend, 'numba' or 'numpy'."""
    return BACKEND

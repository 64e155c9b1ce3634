"""Hot-kernel dispatch.

The jitted path is the default; set ``EMPC_NO_NUMBA=1`` to force the pure
numpy fallback (also used automatically when numba is not importable).
``BACKEND`` records which path is active.
"""

import os

_flag = os.environ.get("EMPC_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _flag in {"1", "true", "yes", "on"}

if NUMBA_DISABLED:
    from empc import _kernels_numpy as _impl

    BACKEND = "numpy"
else:
    try:
        from empc import _kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:
        from empc import _kernels_numpy as _impl

        BACKEND = "numpy"

COST_POLY = _impl.COST_POLY
COST_ABSXY = _impl.COST_ABSXY
monomial_batch = _impl.monomial_batch
stage_cost_batch = _impl.stage_cost_batch
state_poly_batch = _impl.state_poly_batch
ocp_objective = _impl.ocp_objective
ocp_dissipation = _impl.ocp_dissipation

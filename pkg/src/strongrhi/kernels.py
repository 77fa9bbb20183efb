"""Backend selection for the hot kernels.

The compiled extension is used when it imports and the dimension is supported;
``STRONGRHI_PURE=1`` forces the numpy fallback.
"""

import os

from . import _sweep_py

try:
    if os.environ.get("STRONGRHI_PURE", "") in ("1", "true", "yes"):
        raise ImportError("pure backend requested")
    from . import _sweep as _compiled
except ImportError:
    _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def sweep_max(cf, cm, null, backend=None):
    """Dispatch to the compiled sweep for 1D/2D tables, numpy otherwise."""
    use = backend or BACKEND
    if use == "compiled" and _compiled is not None and cf.ndim <= 2:
        return _compiled.sweep_max(cf, cm, float(null))
    return _sweep_py.sweep_max(cf, cm, null)

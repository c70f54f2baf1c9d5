"""Hot kernels with backend selection at import time.

The compiled ``_core`` extension is used when it was built; otherwise the
pure-Python ``_fallback`` takes over. Setting ``IDEPCA_PURE_PYTHON=1``
forces the fallback.
"""

import os

from . import _fallback

if os.environ.get("IDEPCA_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
else:
    try:
        from . import _core as _impl
    except ImportError:  # extension not built
        _impl = _fallback

BACKEND = _impl.BACKEND
as_code = _impl.as_code
as_consts = _impl.as_consts
run_program = _impl.run_program
hermite = _impl.hermite
hermite_derivative = _impl.hermite_derivative
adaptive_simpson = _impl.adaptive_simpson
simpson_program = _impl.simpson_program
integrate_steps = _impl.integrate_steps


def available_backends():
    """Return {name: module} for every importable backend."""
    found = {"python": _fallback}
    try:
        from . import _core
    except ImportError:
        pass
    else:
        found["cython"] = _core
    return found

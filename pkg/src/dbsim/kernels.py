"""Backend selection for the bulk channel kernels.

The compiled extension is preferred. Setting ``DBSIM_PURE_PYTHON=1`` in the
environment, or a failed build, selects the numpy fallback. ``BACKEND``
names the active implementation.
"""
import os

from dbsim import _pykernels

if os.environ.get("DBSIM_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from dbsim import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "python" if _impl is _pykernels else "cython"

link_terms = _impl.link_terms
expected_power = _impl.expected_power
interference = _impl.interference
leakage = _impl.leakage
user_se = _impl.user_se


def available_backends():
    """Map of backend name to module, for tests and benchmarks."""
    out = {"python": _pykernels}
    try:
        from dbsim import _ckernels
    except ImportError:
        pass
    else:
        out["cython"] = _ckernels
    return out

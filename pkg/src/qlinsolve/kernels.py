"""Kernel dispatch: compiled extension when available, numpy otherwise.

Set ``QLINSOLVE_PURE_PYTHON=1`` before import to force the fallback.
"""
import os

from qlinsolve import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("QLINSOLVE_PURE_PYTHON"):
    try:
        from qlinsolve import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels

apply_1q = _impl.apply_1q
apply_mcx = _impl.apply_mcx
jacobi_sweep = _impl.jacobi_sweep
qsp_response = _impl.qsp_response


def implementations():
    """Return ``{name: module}`` for every importable kernel backend."""
    found = {"python": _pykernels}
    try:
        from qlinsolve import _ckernels

        found["cython"] = _ckernels
    except ImportError:
        pass
    return found

"""Backend selection for the coordinate-descent kernel.

The compiled extension is used when it imports; set ``SPARSECC_BACKEND=python``
to force the pure-Python fallback.
"""
import os

from sparsecc import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("SPARSECC_BACKEND", "").lower() != "python":
    try:
        from sparsecc import _core
    except ImportError:  # pragma: no cover - depends on the build
        pass
    else:
        _impl = _core
        BACKEND = "cython"


def get_backend(name=None):
    """Return the kernel module for ``name`` ("cython" / "python"), or the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _fallback
    if name == "cython":
        from sparsecc import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")


def cd_solve(Z, w, grad, grad0, coef, u, lam, max_sweeps, tol):
    return _impl.cd_solve(Z, w, grad, grad0, coef, u, lam, int(max_sweeps), tol)

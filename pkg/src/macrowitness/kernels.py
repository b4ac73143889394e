"""Backend selection for the in-place density-matrix kernels.

The compiled extension is used when it was built; otherwise (or when
``MACROWITNESS_PURE_PYTHON`` is set to a non-empty value) the numpy
fallback is used. Both expose ``apply_1q``, ``apply_cnot`` and
``apply_1q_superop`` with identical semantics.
"""
import contextlib
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("MACROWITNESS_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        _impl = _compiled
        BACKEND = "cython"


def get_backend(name=None):
    """Return the kernel module for ``name`` ("cython" or "python"), or the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401
        names.append("cython")
    except ImportError:
        pass
    return names


def apply_1q(rho, n, q, u):
    _impl.apply_1q(rho, n, q, u)


def apply_cnot(rho, n, control, target):
    _impl.apply_cnot(rho, n, control, target)


def apply_1q_superop(rho, n, q, s):
    _impl.apply_1q_superop(rho, n, q, s)


@contextlib.contextmanager
def use_backend(name):
    """Temporarily route the wrapper functions to backend ``name``."""
    global _impl, BACKEND
    saved = _impl, BACKEND
    _impl, BACKEND = get_backend(name), name
    try:
        yield _impl
    finally:
        _impl, BACKEND = saved

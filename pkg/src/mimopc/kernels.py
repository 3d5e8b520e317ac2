"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it was built; otherwise (or
when ``MIMOPC_PURE_PYTHON`` is set) the NumPy implementations are used.
"""
import os

from mimopc import _pykernels

BACKENDS = {"python": _pykernels}
try:
    from mimopc import _ckernels

    BACKENDS["cython"] = _ckernels
except ImportError:  # extension not built
    _ckernels = None

if os.environ.get("MIMOPC_PURE_PYTHON") or _ckernels is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

LseSystem = BACKENDS[BACKEND].LseSystem
fixed_point = BACKENDS[BACKEND].fixed_point


def get_backend(name=None):
    """Module implementing the kernels for ``name`` (default: the active one)."""
    try:
        return BACKENDS[name or BACKEND]
    except KeyError:
        raise ValueError(f"unknown or unavailable kernel backend {name!r}; have {sorted(BACKENDS)}") from None


def set_backend(name) -> str:
    """Switch the active backend; returns the previous one."""
    global BACKEND, LseSystem, fixed_point
    impl = get_backend(name)
    previous, BACKEND = BACKEND, name
    LseSystem, fixed_point = impl.LseSystem, impl.fixed_point
    return previous

"""Kernel backend selection.

Two interchangeable implementations of the hot dense-layer kernels exist:
the compiled Cython extension (``emogan._speedups``) and a pure-numpy
fallback (``emogan._kernels_np``). The extension is preferred when built;
set ``EMOGAN_KERNELS=numpy`` (or ``ext``) to force a backend, or call
:func:`set_backend` at runtime. ``benchmarks/bench_kernels.py`` compares
the two.
"""

import os

from . import _kernels_np

try:
    from . import _speedups
except ImportError:
    _speedups = None

_IMPLS = {"numpy": _kernels_np}
if _speedups is not None:
    _IMPLS["ext"] = _speedups

_impl = None
backend_name = None


def available_backends():
    return tuple(sorted(_IMPLS))


def set_backend(name):
    """Select the kernel implementation; returns the active backend name."""
    global _impl, backend_name
    if name == "auto":
        name = "ext" if "ext" in _IMPLS else "numpy"
    if name not in _IMPLS:
        raise ValueError(f"unknown kernel backend {name!r}; built: {available_backends()}")
    _impl = _IMPLS[name]
    backend_name = name
    return backend_name


set_backend(os.environ.get("EMOGAN_KERNELS", "auto"))


def affine_forward(x, w, b, act):
    return _impl.affine_forward(x, w, b, act)


def affine_backward(dout, x, w, out, act):
    return _impl.affine_backward(dout, x, w, out, act)


def sgd_update(param, vel, grad, lr, momentum):
    _impl.sgd_update(param, vel, grad, lr, momentum)

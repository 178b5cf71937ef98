"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the NumPy
fallback is used. Setting ``CNE_KERNELS=python`` forces the fallback.
"""
import os
from types import SimpleNamespace

from . import _kernels_py

__all__ = (
    "random_walks",
    "count_window_pairs",
    "window_pairs",
    "scatter_add_rows",
    "gru_fwd_gates",
    "gru_fwd_blend",
    "gru_bwd_blend",
    "gru_bwd_reset",
)


def _load(name):
    if name == "python":
        return _kernels_py
    from . import _gru_kernels, _kernels
    return SimpleNamespace(
        __name__="cython",
        **{n: getattr(_gru_kernels if n.startswith("gru_") else _kernels, n) for n in __all__},
    )


def available_backends():
    out = ["python"]
    try:
        _load("cython")
    except ImportError:
        pass
    else:
        out.insert(0, "cython")
    return out


def get_backend(name):
    """Return the kernel module for ``name`` ("cython" or "python")."""
    if name not in ("cython", "python"):
        raise ValueError(f"unknown kernel backend {name!r}")
    return _load(name)


if os.environ.get("CNE_KERNELS", "").lower() == "python":
    BACKEND = "python"
else:
    BACKEND = available_backends()[0]

_mod = _load(BACKEND)
random_walks = _mod.random_walks
count_window_pairs = _mod.count_window_pairs
window_pairs = _mod.window_pairs
scatter_add_rows = _mod.scatter_add_rows
gru_fwd_gates = _mod.gru_fwd_gates
gru_fwd_blend = _mod.gru_fwd_blend
gru_bwd_blend = _mod.gru_bwd_blend
gru_bwd_reset = _mod.gru_bwd_reset

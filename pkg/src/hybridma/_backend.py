"""Kernel backend selection.

The compiled extension is used when it imports; setting
``HYBRIDMA_PURE_PYTHON=1`` forces the pure-Python reference.
"""

from __future__ import annotations

import os

import numpy as np

from . import _fallback

if os.environ.get("HYBRIDMA_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"


def get(name: str | None = None):
    """Module implementing the kernels: ``"cython"``, ``"python"`` or the default."""
    if name is None:
        return _impl
    if name == "python":
        return _fallback
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")


def state_arrays(states):
    gamma = np.array([s.gamma for s in states], dtype=float)
    q_bits = np.array([s.q_bits for s in states], dtype=float)
    z_tilde = np.array([s.z_tilde for s in states], dtype=float)
    rho = np.array([s.rho_bps for s in states], dtype=float)
    return gamma, q_bits, z_tilde, rho


def pair_tables(states, params, impl=None):
    """All-pairs metric, power and effective-rate tables for a list of states."""
    return (impl or _impl).pair_tables(*state_arrays(states), params)


def oma_vectors(states, params, impl=None):
    return (impl or _impl).oma_vectors(*state_arrays(states), params)


def match(metric, impl=None) -> np.ndarray:
    return (impl or _impl).match(metric)

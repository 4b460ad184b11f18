"""Kernel backend selection.

The compiled extension ``breathauth._core`` is preferred when importable;
otherwise the NumPy fallback is used. Set ``BREATHAUTH_KERNEL=numpy`` or
``=compiled`` to force a backend (the latter raises if the extension is
missing).
"""

from __future__ import annotations

import contextlib
import functools
import os

import numpy as np

from . import _core_numpy

try:
    from . import _core  # type: ignore[attr-defined]

    HAVE_COMPILED = True
except ImportError:
    _core = None  # type: ignore[assignment]
    HAVE_COMPILED = False

_forced = os.environ.get("BREATHAUTH_KERNEL", "").strip().lower()
if _forced == "numpy":
    _backend = _core_numpy
elif _forced == "compiled":
    if not HAVE_COMPILED:
        raise ImportError(
            "BREATHAUTH_KERNEL=compiled but breathauth._core is not built; "
            "run 'python setup.py build_ext --inplace' or reinstall"
        )
    _backend = _core
elif _forced:
    raise ValueError(f"BREATHAUTH_KERNEL must be 'numpy' or 'compiled', got {_forced!r}")
else:
    _backend = _core if HAVE_COMPILED else _core_numpy

BACKEND = "compiled" if _backend is _core and _core is not None else "numpy"


def backend_name() -> str:
    return BACKEND


@contextlib.contextmanager
def use_backend(name: str):
    """Temporarily force a backend (parity tests, benchmarks)."""
    global _backend, BACKEND
    if name == "compiled" and not HAVE_COMPILED:
        raise ImportError("compiled kernel backend is not built")
    if name not in ("compiled", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    saved_backend, saved_name = _backend, BACKEND
    _backend = _core if name == "compiled" else _core_numpy
    BACKEND = name
    try:
        yield
    finally:
        _backend, BACKEND = saved_backend, saved_name


@functools.lru_cache(maxsize=256)
def detrend_basis(window: int, order: int) -> np.ndarray:
    """Orthonormal polynomial basis (thin QR of the Vandermonde matrix).

    The abscissa is centered and scaled to [-1/2, 1/2) so order-3 fits stay
    well conditioned at every window size. Cached: segment batches reuse the
    same window sizes.
    """
    t = (np.arange(window, dtype=np.float64) - 0.5 * (window - 1)) / window
    vand = np.vander(t, order + 1, increasing=True)
    q, _ = np.linalg.qr(vand)
    q = np.ascontiguousarray(q)
    q.setflags(write=False)
    return q


def window_msr(profile: np.ndarray, scale: int, q_basis: np.ndarray) -> np.ndarray:
    """Per-window mean-square detrending residuals at one scale."""
    return np.asarray(_backend.window_msr(profile, int(scale), q_basis))


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    feats: np.ndarray,
    min_leaf: int,
) -> tuple[int, float, float]:
    """Best Gini split: (feature, threshold, child_impurity); feature -1 if none."""
    return _backend.best_split(X, y, idx, feats, int(min_leaf))

"""Kernel dispatch: compiled Cython core when available, pure Python otherwise.

Set ``FILAMENT3D_PURE_PYTHON=1`` before import to force the fallback.
``BACKEND`` names the active implementation; ``use_backend`` switches at
runtime (used by the tests and the benchmark).
"""

import os

import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_IMPLS = {"python": _pykernels}
if _ckernels is not None:
    _IMPLS["cython"] = _ckernels

if os.environ.get("FILAMENT3D_PURE_PYTHON", "").strip() not in ("", "0") or _ckernels is None:
    BACKEND = "python"
else:
    BACKEND = "cython"

_impl = _IMPLS[BACKEND]


def available_backends():
    return sorted(_IMPLS)


def use_backend(name):
    """Select the kernel implementation; returns the previous backend name."""
    global BACKEND, _impl
    if name not in _IMPLS:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    old = BACKEND
    BACKEND, _impl = name, _IMPLS[name]
    return old


def chord_walk(verts, d, steps):
    """Walk ``steps`` equal chords of length ``d`` along a polyline.

    Returns ``(points, done, residual)``; ``residual`` is a continuous
    function of ``d`` that crosses zero where the last chord ends exactly
    at the final vertex.
    """
    return _impl.chord_walk(np.ascontiguousarray(verts, dtype=float), float(d), int(steps))


def frechet_table(dist):
    """Coupling table of the discrete Fréchet recursion."""
    return _impl.frechet_table(np.ascontiguousarray(dist, dtype=float))


def warp_table(cost):
    """Accumulated-cost table of a monotone (time-warping) alignment."""
    return _impl.warp_table(np.ascontiguousarray(cost, dtype=float))


def segment_dp(s, y, eps, min_len, l1, tie_tol=1e-12):
    """Optimal penalized partition of (s, y) into line segments.

    Returns ``(total_cost, starts)`` where ``starts`` are segment start indices.
    """
    return _impl.segment_dp(
        np.ascontiguousarray(s, dtype=float),
        np.ascontiguousarray(y, dtype=float),
        float(eps),
        int(min_len),
        bool(l1),
        float(tie_tol),
    )


def integrate_frames(kappa, tau, h, F0, printed=False):
    """Propagate an orthonormal frame with the truncated series update.

    Returns ``(frames, drift)``: frames is (n, 3, 3) with rows T, N, B and
    drift the pre-correction orthonormality deviation of each step.
    """
    return _impl.integrate_frames(
        np.ascontiguousarray(kappa, dtype=float),
        np.ascontiguousarray(tau, dtype=float),
        float(h),
        np.ascontiguousarray(F0, dtype=float),
        bool(printed),
    )

"""Integrate a piece-wise clothoid model back to 3D and register it to data."""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass

import numpy as np

from . import kernels
from .curve import Polyline3D, as_points
from .errors import DegenerateRegistration, InvalidInput, NumericalFailure

SERIES = ("corrected", "printed")
# largest frame rotation |omega| * h per integration step; longer steps are split
MAX_TURN = 0.2

_integrity_log = contextvars.ContextVar("integrity_log", default=None)


@contextlib.contextmanager
def frame_integrity_log():
    """Collect :class:`IntegratedFrames` integrity stats of every integration run inside the block."""
    log = []
    token = _integrity_log.set(log)
    try:
        yield log
    finally:
        _integrity_log.reset(token)


@dataclass(frozen=True)
class RigidTransform:
    """``x -> rotation @ (x - pivot) + translation``."""

    rotation: np.ndarray
    translation: np.ndarray
    pivot: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        if R.shape != (3, 3) or not np.allclose(R @ R.T, np.eye(3), atol=1e-9) or abs(np.linalg.det(R) - 1) > 1e-9:
            raise InvalidInput("rotation must be a proper orthonormal 3x3 matrix")

    def apply(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (pts - self.pivot) @ self.rotation.T + self.translation


@dataclass(frozen=True, eq=False)
class IntegratedFrames:
    s: np.ndarray
    frames: np.ndarray  # (n, 3, 3), rows T, N, B
    kappa: np.ndarray
    tau: np.ndarray
    drift: np.ndarray  # pre-correction deviation of each step
    post_deviation: float
    samples: np.ndarray | None = None  # indices of the requested grid; None means all

    def __post_init__(self):
        if self.samples is None:
            object.__setattr__(self, "samples", np.arange(len(self.s)))

    @property
    def n_steps(self):
        return len(self.drift)

    def at_samples(self):
        """The frames on the requested grid only (substeps dropped)."""
        i = self.samples
        return self.frames[i], self.s[i]

    @property
    def T(self):
        return self.frames[:, 0]

    @property
    def N(self):
        return self.frames[:, 1]

    @property
    def B(self):
        return self.frames[:, 2]

    def __len__(self):
        return len(self.s)

    def drift_per_1000_steps(self):
        """Largest accumulated pre-correction drift over any 1000 consecutive steps."""
        if len(self.drift) == 0:
            return 0.0
        c = np.concatenate(([0.0], np.cumsum(self.drift)))
        w = min(1000, len(self.drift))
        return float(np.max(c[w:] - c[:-w]))


def orthonormality_deviation(frames):
    """Max deviation from an orthonormal right-handed frame over a (n, 3, 3) stack."""
    G = np.einsum("nij,nkj->nik", frames, frames)
    dev = np.abs(G - np.eye(3)).max(axis=(1, 2))
    hand = np.abs(np.cross(frames[:, 0], frames[:, 1]) - frames[:, 2]).max(axis=1)
    return float(max(dev.max(initial=0.0), hand.max(initial=0.0)))


def integrate_frames(model, delta_s, n_steps=None, midpoint=False, series="corrected", max_turn=MAX_TURN):
    """Propagate the initial frame along the model with a truncated series step.

    Curvature and torsion of each step are evaluated at its left endpoint
    (``midpoint=True`` uses the step centre). ``series="corrected"`` is the
    exact fourth-order expansion of the frame rotation; ``"printed"`` keeps
    the coefficient variant with the sign/denominator differences (see
    README). Every step is re-orthonormalized (T kept, N projected,
    B = T x N).

    A step whose rotation ``sqrt(kappa^2 + tau^2) * delta_s`` exceeds
    ``max_turn`` is split into equal substeps; ``samples`` of the result
    indexes the requested grid. Pass ``max_turn=np.inf`` to disable.
    """
    if not delta_s > 0:
        raise InvalidInput("delta_s must be positive")
    if series not in SERIES:
        raise InvalidInput(f"series must be one of {SERIES}")
    if not max_turn > 0:
        raise InvalidInput("max_turn must be positive")
    if n_steps is None:
        n_steps = int(round(model.length / delta_s))
    s0 = float(model.arclength[0])
    grid = s0 + delta_s * np.arange(n_steps + 1)

    # substeps per step from the rate at both ends (and the centre)
    probe = np.concatenate([grid, grid[:-1] + 0.5 * delta_s])
    omega = np.hypot(model.kappa_at(probe), model.tau_at(probe))
    if not np.all(np.isfinite(omega)):
        raise NumericalFailure("model evaluates to a non-finite curvature or torsion")
    w = np.maximum(np.maximum(omega[:n_steps], omega[1 : n_steps + 1]), omega[n_steps + 1 :])
    m = np.maximum(1, np.ceil(w * delta_s / max_turn)).astype(int)
    samples = np.concatenate(([0], np.cumsum(m)))
    h = np.repeat(delta_s / m, m)
    s = np.concatenate(([s0], s0 + np.cumsum(h)))
    s[samples] = grid
    s_eval = s[:-1] + (0.5 * h if midpoint else 0.0)
    kappa = model.kappa_at(s_eval)
    tau = model.tau_at(s_eval)
    if not (np.all(np.isfinite(kappa)) and np.all(np.isfinite(tau))):
        raise NumericalFailure("model evaluates to a non-finite curvature or torsion")
    F0 = _orthonormal_frame(model.initial_frame)
    # the update depends on kappa * h and tau * h only
    frames, drift = kernels.integrate_frames(kappa * h, tau * h, 1.0, F0, series == "printed")
    if not np.all(np.isfinite(frames)):
        raise NumericalFailure("frame integration diverged")
    out = IntegratedFrames(s, frames, kappa, tau, drift, orthonormality_deviation(frames), samples)
    log = _integrity_log.get()
    if log is not None:
        log.append(out)
    return out


def _orthonormal_frame(F):
    F = np.asarray(F, dtype=float)
    T = F[0] / np.linalg.norm(F[0])
    N = F[1] - F[1].dot(T) * T
    N /= np.linalg.norm(N)
    return np.array([T, N, np.cross(T, N)])


def integrate_points(frames, p0, delta_s=None):
    """Trapezoidal accumulation of positions from tangents.

    ``frames`` is an :class:`IntegratedFrames` (its own, possibly uneven,
    spacing is used and the points on the requested grid are returned) or
    an array of tangents / frames spaced ``delta_s`` apart.
    """
    p0 = np.asarray(p0, dtype=float).reshape(3)
    if isinstance(frames, IntegratedFrames):
        T, h, keep = frames.T, np.diff(frames.s), frames.samples
    else:
        T = np.asarray(frames, dtype=float)
        if T.ndim == 3:
            T = T[:, 0]
        if delta_s is None:
            raise InvalidInput("delta_s is required for a bare tangent array")
        h, keep = np.full(max(len(T) - 1, 0), float(delta_s)), None
    if len(T) < 1:
        raise InvalidInput("need at least one frame")
    steps = 0.5 * h[:, None] * (T[1:] + T[:-1])
    pts = np.vstack([p0, p0 + np.cumsum(steps, axis=0)])
    return Polyline3D(pts if keep is None else pts[keep])


def register_rigid(p, c):
    """Least-squares proper rigid transform mapping ``p`` onto ``c`` (paired by index).

    Returns ``(RigidTransform, registered Polyline3D, rms)``. The pivot is
    the centroid of ``p``; reflections are rejected by the determinant
    correction.
    """
    P = as_points(p, 3)
    C = as_points(c, 3)
    if P.shape != C.shape:
        raise InvalidInput("registration needs equal point counts")
    if len(P) < 3:
        raise InvalidInput("registration needs at least 3 points")
    pc = P.mean(axis=0)
    cc = C.mean(axis=0)
    Pd, Cd = P - pc, C - cc
    for X, Xd, name in ((P, Pd, "source"), (C, Cd, "target")):
        if np.abs(Xd).max() <= 1e-12 * (1.0 + np.abs(X).max()):
            raise DegenerateRegistration(f"{name} points are coincident")
    H = Pd.T @ Cd
    U, S, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    if d == 0:
        d = 1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    tf = RigidTransform(R, cc, pc)
    reg = tf.apply(P)
    rms = float(np.sqrt(np.mean(np.sum((reg - C) ** 2, axis=1))))
    return tf, Polyline3D(reg), rms


@dataclass(frozen=True, eq=False)
class Reconstruction:
    curve: Polyline3D
    rms: float
    transform: RigidTransform
    integrated: Polyline3D
    frames: IntegratedFrames

    def __iter__(self):
        yield self.curve
        yield self.rms


def reconstruct(model, observed, midpoint=False, series="corrected", max_turn=MAX_TURN):
    """Integrate ``model`` at the observation density and register it to ``observed``.

    Unpacks as ``(curve, rms)``; the returned object also carries the
    transform, the unregistered curve and the integrated frames.
    """
    obs = as_points(observed, 3)
    k = len(obs)
    if k < 3:
        raise InvalidInput("observed curve needs at least 3 points")
    L = model.length
    if not L > 0:
        raise InvalidInput("model has zero length")
    ds = L / (k - 1)
    fr = integrate_frames(model, ds, n_steps=k - 1, midpoint=midpoint, series=series, max_turn=max_turn)
    raw = integrate_points(fr, model.initial_point)
    tf, reg, rms = register_rigid(raw, obs)
    return Reconstruction(reg, rms, tf, raw, fr)

"""Geometric value types, arc length and uniform resampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_lsq_spline
from scipy.optimize import brentq

from . import kernels
from .errors import InvalidInput

__all__ = [
    "OrderedPolyline2D",
    "Polyline3D",
    "CameraModel",
    "arc_length",
    "resample_uniform",
    "as_points",
    "smooth_curve",
]


def as_points(poly, dim=None):
    """Return the (n, d) float array behind a polyline or array-like."""
    if isinstance(poly, (OrderedPolyline2D, Polyline3D)):
        pts = poly.points
    else:
        pts = np.asarray(poly, dtype=float)
    if pts.ndim != 2 or (dim is not None and pts.shape[1] != dim):
        raise InvalidInput(f"expected an (n, {dim or 'd'}) point array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise InvalidInput("points must be finite")
    return pts


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class OrderedPolyline2D:
    """Image-plane points ordered from base to tip."""

    points: np.ndarray

    def __post_init__(self):
        pts = _frozen(as_points(self.points, 2))
        if len(pts) < 2:
            raise InvalidInput("an ordered polyline needs at least 2 points")
        if np.any(np.all(np.diff(pts, axis=0) == 0.0, axis=1)):
            raise InvalidInput("consecutive points must be distinct")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    @property
    def cumulative_arclength(self):
        return arc_length(self.points)

    @property
    def length(self):
        return float(self.cumulative_arclength[-1])


@dataclass(frozen=True, eq=False)
class Polyline3D:
    """Ordered 3D points with their cumulative chord length."""

    points: np.ndarray
    cumulative_arclength: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = _frozen(as_points(self.points, 3))
        if len(pts) < 1:
            raise InvalidInput("empty polyline")
        object.__setattr__(self, "points", pts)
        s = arc_length(pts) if len(pts) >= 2 else np.zeros(1)
        s.setflags(write=False)
        object.__setattr__(self, "cumulative_arclength", s)

    def __len__(self):
        return len(self.points)

    @property
    def length(self):
        return float(self.cumulative_arclength[-1])


@dataclass(frozen=True, eq=False)
class CameraModel:
    """Pinhole camera: intrinsics ``K``, extrinsics ``Rt`` and homography to the reference view."""

    K: np.ndarray
    Rt: np.ndarray
    H: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        K = _frozen(self.K)
        Rt = _frozen(self.Rt)
        H = _frozen(self.H)
        if K.shape != (3, 3) or Rt.shape != (3, 4) or H.shape != (3, 3):
            raise InvalidInput("camera expects K 3x3, Rt 3x4, H 3x3")
        if np.any(np.abs(np.tril(K, -1)) > 0) or np.any(np.diag(K) <= 0):
            raise InvalidInput("K must be upper triangular with a positive diagonal")
        R = Rt[:, :3]
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-9) or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise InvalidInput("rotation part of Rt must be a proper orthonormal matrix")
        if abs(np.linalg.det(H)) < 1e-300:
            raise InvalidInput("homography must be invertible")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "Rt", Rt)
        object.__setattr__(self, "H", H)

    @property
    def P(self):
        return self.K @ self.Rt

    @property
    def R(self):
        return self.Rt[:, :3]

    @property
    def t(self):
        return self.Rt[:, 3]

    @property
    def center(self):
        return -self.R.T @ self.t

    def depth(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X @ self.R[2] + self.t[2]

    def project(self, X):
        """Project (n, 3) world points to (n, 2) pixels.

        Raises ProjectionDegenerate for points at or behind the camera plane.
        """
        from .errors import ProjectionDegenerate

        X = np.atleast_2d(np.asarray(X, dtype=float))
        xh = X @ self.P[:, :3].T + self.P[:, 3]
        if np.any(self.depth(X) <= 1e-12):
            raise ProjectionDegenerate("point at or behind the camera")
        return xh[:, :2] / xh[:, 2:3]

    def with_homography(self, H):
        return CameraModel(self.K, self.Rt, H)

    def to_dict(self):
        return {
            "K": [float(v) for v in self.K.ravel()],
            "Rt": [float(v) for v in self.Rt.ravel()],
            "H": [float(v) for v in self.H.ravel()],
        }

    @classmethod
    def from_dict(cls, d):
        try:
            K = np.reshape(np.asarray(d["K"], dtype=float), (3, 3))
            Rt = np.reshape(np.asarray(d["Rt"], dtype=float), (3, 4))
            H = np.reshape(np.asarray(d.get("H", np.eye(3).ravel()), dtype=float), (3, 3))
        except (KeyError, ValueError) as exc:
            raise InvalidInput(f"malformed camera record: {exc}") from exc
        return cls(K, Rt, H)


def arc_length(poly):
    """Cumulative Euclidean chord length, starting at 0.

    >>> arc_length([(0, 0, 0), (3, 4, 0)]).tolist()
    [0.0, 5.0]
    """
    pts = as_points(poly)
    if len(pts) < 2:
        raise InvalidInput("arc length needs at least 2 points")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    return np.concatenate(([0.0], np.cumsum(seg)))


def resample_uniform(poly, k):
    """Resample a polyline to exactly ``k`` points with equal chord spacing.

    Output points lie on the input polyline, consecutive output points are
    the same Euclidean distance apart and the endpoints are copied bitwise.
    Equal chords (rather than equal arc length along the input) make the
    operation idempotent.

    Returns an array of the same dimension as the input; wrap it in a
    polyline type as needed.
    """
    if k < 2:
        raise InvalidInput("k must be at least 2")
    pts = as_points(poly)
    if len(pts) < 2:
        raise InvalidInput("resampling needs at least 2 points")
    keep = np.concatenate(([True], np.any(np.diff(pts, axis=0) != 0.0, axis=1)))
    verts = np.ascontiguousarray(pts[keep])
    if len(verts) < 2:
        raise InvalidInput("polyline has zero length")
    total = float(arc_length(verts)[-1])
    out = np.empty((k, pts.shape[1]))
    out[0] = pts[0]
    out[-1] = pts[-1]
    if k == 2:
        return out

    steps = k - 1
    hi = total / steps

    def residual(d):
        return kernels.chord_walk(verts, d, steps)[2]

    if residual(hi) <= 0.0:
        d = hi
    else:
        lo = hi
        while residual(lo) > 0.0:
            lo *= 0.5
        d = brentq(residual, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=200)
    walked, done, _ = kernels.chord_walk(verts, d, steps)
    if done < k - 2:
        d *= 1.0 - 1e-12
        walked, done, _ = kernels.chord_walk(verts, d, steps)
    out[1:-1] = walked[: k - 2]
    return out


def smooth_curve(poly, n_knots=4, degree=5, dense=4000):
    """Least-squares spline smoothing of a polyline, resampled to its own size.

    A degree-``degree`` spline with ``n_knots`` evenly spaced interior knots
    (in normalized chord length) is fitted to every coordinate. The spline is
    evaluated densely and resampled with equal chords back to ``len(poly)``
    points. ``n_knots = 0`` returns a copy of the input.

    Triangulated curves carry pixel quantization noise that discrete
    curvature and torsion amplify; a fixed knot budget bounds the bandwidth
    independently of the noise level.
    """
    pts = as_points(poly)
    if n_knots <= 0:
        return pts.copy()
    n = len(pts)
    if n < n_knots + degree + 1:
        raise InvalidInput(f"{n} points are too few for {n_knots} knots at degree {degree}")
    s = arc_length(pts)
    if s[-1] <= 0.0:
        raise InvalidInput("polyline has zero length")
    u = s / s[-1]
    inner = np.linspace(0.0, 1.0, n_knots + 2)[1:-1]
    t = np.concatenate((np.zeros(degree + 1), inner, np.ones(degree + 1)))
    try:
        spl = make_lsq_spline(u, pts, t, k=degree)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise InvalidInput(f"spline smoothing failed: {exc}") from exc
    return resample_uniform(spl(np.linspace(0.0, 1.0, dense)), n)

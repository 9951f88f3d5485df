"""Discrete Frenet–Serret frames, curvature and torsion of a 3D polyline."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curve import Polyline3D, as_points
from .errors import InvalidInput

EPS_STRAIGHT = 1e-8

BOUNDARY_POLICY = (
    "first/last sample copy frame and curvature of the nearest interior sample; "
    "torsion at samples 0, 1 copies sample 2 and the last sample copies the one before; "
    "copied samples are flagged extrapolated"
)


@dataclass(frozen=True)
class FrenetSample:
    T: np.ndarray
    N: np.ndarray
    B: np.ndarray
    kappa: float
    tau: float
    s: float


@dataclass(frozen=True, eq=False)
class FrenetSeries:
    """Per-vertex frames and invariants, stored column-wise.

    ``extrapolated`` marks samples whose values were copied from a
    neighbour; ``propagated`` marks samples on locally straight runs where
    the normal was carried over from the nearest curved sample.
    """

    s: np.ndarray
    T: np.ndarray
    N: np.ndarray
    B: np.ndarray
    kappa: np.ndarray
    tau: np.ndarray
    extrapolated: np.ndarray
    propagated: np.ndarray
    boundary_policy: str = BOUNDARY_POLICY

    def __len__(self):
        return len(self.s)

    def __getitem__(self, i):
        return FrenetSample(self.T[i], self.N[i], self.B[i], float(self.kappa[i]), float(self.tau[i]), float(self.s[i]))

    @property
    def samples(self):
        return [self[i] for i in range(len(self))]

    def first_defined(self):
        """Index of the first sample that is neither extrapolated nor propagated."""
        ok = np.flatnonzero(~self.extrapolated & ~self.propagated)
        if len(ok):
            return int(ok[0])
        ok = np.flatnonzero(~self.extrapolated)
        return int(ok[0]) if len(ok) else 0


def _perpendicular(t):
    axis = np.zeros(3)
    axis[np.argmin(np.abs(t))] = 1.0
    v = axis - axis.dot(t) * t
    return v / np.linalg.norm(v)


def _orthogonalize(v, t):
    v = v - v.dot(t) * t
    nv = np.linalg.norm(v)
    return v / nv if nv > 0 else _perpendicular(t)


def discrete_frames(curve, eps_straight=EPS_STRAIGHT):
    """Frames (T, N, B) at every vertex plus the raw turning magnitudes.

    The tangent at vertex ``i`` is the unit forward chord; the normal is the
    tangent difference with the previous chord, made orthogonal to the
    tangent so that each frame is exactly orthonormal.
    """
    pts = as_points(curve, 3)
    n = len(pts)
    if n < 3:
        raise InvalidInput("Frenet frames need at least 3 points")
    edges = np.diff(pts, axis=0)
    lengths = np.linalg.norm(edges, axis=1)
    if np.any(lengths == 0.0):
        raise InvalidInput("consecutive duplicate points")
    chord_t = edges / lengths[:, None]

    T = np.empty((n, 3))
    N = np.empty((n, 3))
    turn = np.zeros(n)
    T[1 : n - 1] = chord_t[1:]
    dT = chord_t[1:] - chord_t[:-1]
    turn[1 : n - 1] = np.linalg.norm(dT, axis=1)
    N[1 : n - 1] = dT - np.einsum("ij,ij->i", dT, T[1 : n - 1])[:, None] * T[1 : n - 1]
    nn = np.linalg.norm(N[1 : n - 1], axis=1)
    defined = np.zeros(n, dtype=bool)
    defined[1 : n - 1] = (turn[1 : n - 1] >= eps_straight) & (nn > 0)
    N[1 : n - 1] /= np.where(nn > 0, nn, 1.0)[:, None]

    propagated = np.zeros(n, dtype=bool)
    interior = np.arange(1, n - 1)
    good = interior[defined[1 : n - 1]]
    for i in interior[~defined[1 : n - 1]]:
        propagated[i] = True
        if len(good):
            j = good[np.argmin(np.abs(good - i))]
            N[i] = _orthogonalize(N[j], T[i])
        else:
            N[i] = _perpendicular(T[i])

    T[0], N[0] = T[1], N[1]
    T[-1], N[-1] = T[-2], N[-2]
    B = np.cross(T, N)
    extrapolated = np.zeros(n, dtype=bool)
    extrapolated[[0, -1]] = True
    propagated[0], propagated[-1] = propagated[1], propagated[-2]
    s = np.concatenate(([0.0], np.cumsum(lengths)))
    return s, T, N, B, turn, lengths, extrapolated, propagated


def discrete_curvature_torsion(curve, eps_straight=EPS_STRAIGHT):
    """Curvature and signed torsion per unit length at every vertex.

    Curvature is the tangent turning magnitude divided by the mean of the
    two adjacent chord lengths. Torsion is the binormal change over one
    chord, projected on ``-N`` for its sign.
    """
    s, T, N, B, turn, lengths, extrap, prop = discrete_frames(curve, eps_straight)
    n = len(s)
    kappa = np.zeros(n)
    kappa[1 : n - 1] = turn[1 : n - 1] / (0.5 * (lengths[:-1] + lengths[1:]))
    kappa[0], kappa[-1] = kappa[1], kappa[-2]

    tau = np.zeros(n)
    if n >= 4:
        dB = B[2 : n - 1] - B[1 : n - 2]
        mag = np.linalg.norm(dB, axis=1)
        sign = np.sign(-np.einsum("ij,ij->i", dB, N[2 : n - 1]))
        tau[2 : n - 1] = sign * mag / lengths[1 : n - 2]
        tau[:2] = tau[2]
        tau[-1] = tau[-2]
    return FrenetSeries(s, T, N, B, kappa, tau, extrap, prop)


def frenet_series(curve, eps_straight=EPS_STRAIGHT):
    if isinstance(curve, Polyline3D):
        curve = curve.points
    return discrete_curvature_torsion(curve, eps_straight)

"""Piece-wise linear fitting of curvature and torsion.

Curvature and torsion are segmented independently by a penalized dynamic
program (one penalty per added segment plus the line-fit error), then the
fitted lines are re-intersected so the model is continuous, merging
neighbours whose intersection falls outside their span.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .curve import Polyline3D, as_points
from .errors import InvalidInput
from .frenet import FrenetSeries, frenet_series

FIT_NORMS = ("l1_of_l2fit", "pure_l2")
MIN_SEGMENT_LENGTH = 3
PARALLEL_TOL = 1e-12


@dataclass(frozen=True)
class LinearSegment:
    """One line ``y = alpha * s + beta`` fitted to samples ``start_index..end_index``.

    ``s_start``/``s_end`` are the abscissae where the segment is active in
    the (continuous) model; before refinement they are the sample positions.
    """

    start_index: int
    end_index: int
    alpha: float
    beta: float
    fit_error: float
    s_start: float
    s_end: float
    parallel_flag: bool = False

    def __post_init__(self):
        if self.end_index < self.start_index:
            raise InvalidInput("segment end precedes start")
        if self.fit_error < 0:
            raise InvalidInput("fit_error must be nonnegative")

    def __call__(self, s):
        return self.alpha * np.asarray(s, dtype=float) + self.beta

    def to_dict(self):
        return {
            "s_start": self.s_start,
            "s_end": self.s_end,
            "alpha": self.alpha,
            "beta": self.beta,
            "start_index": self.start_index,
            "end_index": self.end_index,
            "fit_error": self.fit_error,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            int(d.get("start_index", 0)),
            int(d.get("end_index", 0)),
            float(d["alpha"]),
            float(d["beta"]),
            float(d.get("fit_error", 0.0)),
            float(d["s_start"]),
            float(d["s_end"]),
        )


def evaluate_segments(segments, s):
    """Evaluate a piecewise-linear function given by consecutive segments."""
    s = np.asarray(s, dtype=float)
    knots = np.array([seg.s_start for seg in segments[1:]])
    idx = np.searchsorted(knots, s, side="right")
    alpha = np.array([seg.alpha for seg in segments])
    beta = np.array([seg.beta for seg in segments])
    return alpha[idx] * s + beta[idx]


def fit_line(s, y, fit_norm="l1_of_l2fit"):
    """Ordinary least-squares line; returns ``(alpha, beta, error)``.

    ``error`` is the sum of absolute residuals of the L2 line for
    ``l1_of_l2fit`` and the sum of squared residuals for ``pure_l2``.
    """
    if fit_norm not in FIT_NORMS:
        raise InvalidInput(f"fit_norm must be one of {FIT_NORMS}")
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    ms, my = s.mean(), y.mean()
    ds, dy = s - ms, y - my
    sxx = ds.dot(ds)
    alpha = ds.dot(dy) / sxx if sxx > 1e-300 else 0.0
    beta = my - alpha * ms
    r = y - (alpha * s + beta)
    err = float(np.abs(r).sum()) if fit_norm == "l1_of_l2fit" else float(r.dot(r))
    return float(alpha), float(beta), err


def _make_segment(s, y, i, j, fit_norm):
    a, b, e = fit_line(s[i : j + 1], y[i : j + 1], fit_norm)
    return LinearSegment(int(i), int(j), a, b, e, float(s[i]), float(s[j]))


def _check_series(s, y):
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    if s.ndim != 1 or s.shape != y.shape:
        raise InvalidInput("s and y must be 1-D arrays of equal length")
    if len(s) < 2:
        raise InvalidInput("segmentation needs at least 2 samples")
    if np.any(np.diff(s) <= 0):
        raise InvalidInput("s must be strictly increasing")
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(y))):
        raise InvalidInput("series must be finite")
    return s, y


def segment_dp(s, y, epsilon, fit_norm="l1_of_l2fit", min_len=MIN_SEGMENT_LENGTH, return_cost=False):
    """Optimal segmentation minimizing ``sum(epsilon + fit_error)``.

    Among partitions whose cost ties within 1e-12 (relative) the one with
    fewer segments wins. Segments have at least ``min_len`` samples unless
    the whole series is shorter.
    """
    s, y = _check_series(s, y)
    if epsilon < 0 or not np.isfinite(epsilon):
        raise InvalidInput("epsilon must be a finite nonnegative number")
    if fit_norm not in FIT_NORMS:
        raise InvalidInput(f"fit_norm must be one of {FIT_NORMS}")
    if min_len < 1:
        raise InvalidInput("min_len must be positive")
    cost, starts = kernels.segment_dp(s, y, epsilon, min_len, fit_norm == "l1_of_l2fit")
    ends = list(starts[1:] - 1) + [len(s) - 1]
    segs = [_make_segment(s, y, i, j, fit_norm) for i, j in zip(starts, ends)]
    if return_cost:
        return segs, float(cost)
    return segs


def segmentation_cost(segments, epsilon):
    return float(sum(epsilon + seg.fit_error for seg in segments))


def _intersection(a, b):
    da = a.alpha - b.alpha
    if abs(da) < PARALLEL_TOL:
        return None
    return (b.beta - a.beta) / da


def enforce_continuity(segments, s):
    """Move every breakpoint to the intersection of the two adjacent lines.

    Lines are kept; only the active ranges ``s_start``/``s_end`` change, so
    the evaluated function is continuous. Adjacent lines that are parallel
    keep their breakpoint (midway between the two fitted ranges), get the
    average intercept and are flagged. Sample index ranges are unchanged.
    """
    s = np.asarray(s, dtype=float)
    segs = list(segments)
    if not segs:
        raise InvalidInput("need at least one segment")
    out = [replace(seg) for seg in segs]
    out[0] = replace(out[0], s_start=float(s[segs[0].start_index]))
    out[-1] = replace(out[-1], s_end=float(s[segs[-1].end_index]))
    for i in range(len(segs) - 1):
        a, b = out[i], out[i + 1]
        x = _intersection(a, b)
        if x is None:
            x = 0.5 * (s[segs[i].end_index] + s[segs[i + 1].start_index])
            beta = 0.5 * (a.beta + b.beta)
            out[i] = replace(a, beta=beta, parallel_flag=True, s_end=float(x))
            out[i + 1] = replace(b, beta=beta, parallel_flag=True, s_start=float(x))
        else:
            out[i] = replace(a, s_end=float(x))
            out[i + 1] = replace(b, s_start=float(x))
    return out


def _overshoot_pair(segments, s):
    """Index of the first adjacent pair to merge, or None."""
    for i in range(len(segments) - 1):
        a, b = segments[i], segments[i + 1]
        x = a.s_end
        if x < s[a.start_index] or x > s[b.end_index]:
            return i
    # breakpoints out of order squeeze a segment to a non-positive length
    for i, seg in enumerate(segments):
        if seg.s_end <= seg.s_start and len(segments) > 1:
            return min(i, len(segments) - 2)
    return None


def merge_overshoot(segments, s, y=None, fit_norm="l1_of_l2fit"):
    """Merge adjacent segments while any refined breakpoint overshoots.

    A breakpoint overshoots when the intersection of two neighbouring lines
    lies outside the outer sample range of the pair, or when it inverts the
    order of breakpoints. Merged pairs are refitted on the union of their
    samples (``y`` is required for refitting) and continuity is re-enforced
    after every merge.
    """
    s = np.asarray(s, dtype=float)
    segs = enforce_continuity(segments, s)
    while True:
        i = _overshoot_pair(segs, s)
        if i is None:
            return segs
        if y is None:
            raise InvalidInput("merging requires the sample values y")
        squeezed = segs[i].s_end <= segs[i].s_start
        if 0 < i < len(segs) - 1 and squeezed:
            left = _make_segment(s, y, segs[i - 1].start_index, segs[i].end_index, fit_norm)
            right = _make_segment(s, y, segs[i].start_index, segs[i + 1].end_index, fit_norm)
            if left.fit_error <= right.fit_error:
                merged, lo = left, i - 1
            else:
                merged, lo = right, i
        else:
            merged, lo = _make_segment(s, y, segs[i].start_index, segs[i + 1].end_index, fit_norm), i
        raw = [replace(seg) for seg in segs]
        raw[lo : lo + 2] = [merged]
        segs = enforce_continuity(raw, s)


def refine_segments(segments, s, y, fit_norm="l1_of_l2fit"):
    return merge_overshoot(enforce_continuity(segments, s), s, y, fit_norm)


@dataclass(frozen=True, eq=False)
class PwcModel:
    """Piece-wise clothoid: piecewise-linear curvature and torsion over arc length."""

    kappa_segments: tuple
    tau_segments: tuple
    arclength: np.ndarray
    initial_frame: np.ndarray
    initial_point: np.ndarray
    penalties: tuple
    fit_norm: str = "l1_of_l2fit"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kappa_segments", tuple(self.kappa_segments))
        object.__setattr__(self, "tau_segments", tuple(self.tau_segments))
        object.__setattr__(self, "arclength", np.asarray(self.arclength, dtype=float))
        object.__setattr__(self, "initial_frame", np.asarray(self.initial_frame, dtype=float).reshape(3, 3))
        object.__setattr__(self, "initial_point", np.asarray(self.initial_point, dtype=float).reshape(3))
        object.__setattr__(self, "penalties", tuple(float(p) for p in self.penalties))

    @property
    def length(self):
        return float(self.arclength[-1] - self.arclength[0])

    def kappa_at(self, s):
        return evaluate_segments(self.kappa_segments, s)

    def tau_at(self, s):
        return evaluate_segments(self.tau_segments, s)

    def to_dict(self):
        T, N, B = self.initial_frame
        return {
            "kappa_segments": [seg.to_dict() for seg in self.kappa_segments],
            "tau_segments": [seg.to_dict() for seg in self.tau_segments],
            "initial_frame": {"T": T.tolist(), "N": N.tolist(), "B": B.tolist()},
            "initial_point": self.initial_point.tolist(),
            "penalties": {"eps_kappa": self.penalties[0], "eps_tau": self.penalties[1]},
            "fit_norm": self.fit_norm,
            "arclength": self.arclength.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        fr = d["initial_frame"]
        pen = d.get("penalties", {})
        if isinstance(pen, dict):
            pen = (pen.get("eps_kappa", 0.0), pen.get("eps_tau", 0.0))
        ks = [LinearSegment.from_dict(x) for x in d["kappa_segments"]]
        ts = [LinearSegment.from_dict(x) for x in d["tau_segments"]]
        arc = d.get("arclength")
        if arc is None:
            arc = [ks[0].s_start, ks[-1].s_end]
        return cls(ks, ts, arc, np.array([fr["T"], fr["N"], fr["B"]]), d["initial_point"], pen, d.get("fit_norm", "l1_of_l2fit"))


def fit_pwc_series(series: FrenetSeries, initial_point, eps_kappa, eps_tau, fit_norm="l1_of_l2fit", min_len=MIN_SEGMENT_LENGTH):
    """Fit a model to an already computed Frenet series."""
    s = series.s
    ks = refine_segments(segment_dp(s, series.kappa, eps_kappa, fit_norm, min_len), s, series.kappa, fit_norm)
    ts = refine_segments(segment_dp(s, series.tau, eps_tau, fit_norm, min_len), s, series.tau, fit_norm)
    i0 = series.first_defined()
    frame = np.array([series.T[i0], series.N[i0], series.B[i0]])
    return PwcModel(ks, ts, s, frame, initial_point, (eps_kappa, eps_tau), fit_norm)


def fit_pwc(curve, eps_kappa, eps_tau, fit_norm="l1_of_l2fit", min_len=MIN_SEGMENT_LENGTH):
    """Segment curvature and torsion of ``curve`` and build a continuous model."""
    pts = as_points(curve.points if isinstance(curve, Polyline3D) else curve, 3)
    if len(pts) < 4:
        raise InvalidInput("fit_pwc needs at least 4 points")
    series = frenet_series(pts)
    return fit_pwc_series(series, pts[0], eps_kappa, eps_tau, fit_norm, min_len)

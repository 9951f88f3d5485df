"""Fit quality metrics, reprojection errors and penalty grid search."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .curve import CameraModel, OrderedPolyline2D, Polyline3D, arc_length, as_points, resample_uniform
from .errors import DegenerateMetric, Filament3DError, InvalidInput
from .frenet import frenet_series
from .pwc import MIN_SEGMENT_LENGTH, fit_pwc_series
from .reconstruction import reconstruct

SECTION_FRACTION = 0.25
SECTIONS = ("base", "tip", "entire")
R2_TARGET = 0.999
SSE_TARGET = 1e-3
EPS_KAPPA_RANGE = (0.0, 1350.0)
EPS_TAU_RANGE = (0.0, 3450.0)
GRID = 10
N_REGIONS = 4
PAIRINGS = ("arc", "nearest")
SSE_MODES = ("raw", "unit_length")


def section_masks(s, fraction=SECTION_FRACTION):
    """Boolean masks of the base and tip quarters (by arc length) plus the whole curve."""
    s = np.asarray(s, dtype=float)
    if not 0 < fraction <= 1:
        raise InvalidInput("section fraction must lie in (0, 1]")
    L = s[-1] - s[0]
    u = s - s[0]
    return {
        "base": u <= fraction * L + 1e-12 * max(L, 1.0),
        "tip": u >= (1 - fraction) * L - 1e-12 * max(L, 1.0),
        "entire": np.ones(len(s), dtype=bool),
    }


def _stats(d):
    return (float(np.mean(d)), float(np.std(d))) if len(d) else (float("nan"), float("nan"))


@dataclass(frozen=True)
class FitMetrics:
    """Goodness of a fitted curve against the observation it was fitted to.

    ``per_section`` maps base/tip/entire to (mean, std) of the pointwise
    distances; ``section_r_squared`` uses each section's own centroid for
    its total sum of squares. ``sse_normalized`` is the SSE of both curves
    scaled to unit observed length.
    """

    r_squared: float
    sse: float
    per_section: dict
    section_r_squared: dict = field(default_factory=dict)
    sse_normalized: float = float("nan")

    def to_dict(self):
        return {
            "r_squared": self.r_squared,
            "sse": self.sse,
            "sse_normalized": self.sse_normalized,
            "per_section": {k: {"mean": v[0], "std": v[1]} for k, v in self.per_section.items()},
            "section_r_squared": dict(self.section_r_squared),
        }


def goodness(fitted, observed, fraction=SECTION_FRACTION):
    """R², SSE and per-section error statistics of ``fitted`` against ``observed``.

    R² = 1 - SSE/TSS with TSS taken about the observed centroid.
    """
    F = as_points(fitted, 3)
    O = as_points(observed, 3)
    if F.shape != O.shape:
        raise InvalidInput("fitted and observed need equal point counts")
    if len(O) == 0:
        raise InvalidInput("empty curves")
    r = F - O
    sq = np.sum(r**2, axis=1)
    sse = float(sq.sum())
    tss = float(np.sum((O - O.mean(axis=0)) ** 2))
    if tss <= 0:
        raise DegenerateMetric("observed points are all identical (zero total sum of squares)")
    d = np.sqrt(sq)
    s = arc_length(O) if len(O) > 1 else np.zeros(1)
    masks = section_masks(s, fraction)
    per = {k: _stats(d[m]) for k, m in masks.items()}
    sec_r2 = {}
    for k, m in masks.items():
        t = float(np.sum((O[m] - O[m].mean(axis=0)) ** 2)) if m.any() else 0.0
        sec_r2[k] = 1.0 - float(sq[m].sum()) / t if t > 0 else float("nan")
    L = s[-1]
    sse_n = float(sse / L**2) if L > 0 else float("nan")
    return FitMetrics(1.0 - sse / tss, sse, per, sec_r2, sse_n)


def reprojection_error(curve, skeleton, camera: CameraModel, k=200, pairing="arc", fraction=SECTION_FRACTION):
    """Pixel distance between the projected 3D curve and an extracted skeleton.

    Both are resampled to ``k`` points at equal 2D arc length. With
    ``pairing="arc"`` point i is compared with point i; ``"nearest"`` uses
    the closest skeleton sample instead. Returns ``{section: (mean, std)}``
    with sections taken as quarters of the skeleton's arc length.
    """
    if pairing not in PAIRINGS:
        raise InvalidInput(f"pairing must be one of {PAIRINGS}")
    X = as_points(curve.points if isinstance(curve, Polyline3D) else curve, 3)
    sk = as_points(skeleton.points if isinstance(skeleton, OrderedPolyline2D) else skeleton, 2)
    if len(X) == 0 or len(sk) == 0:
        raise InvalidInput("empty curve or skeleton")
    uv = camera.project(X)
    if len(uv) == 1 or len(sk) == 1:
        # nothing to resample; compare every projected point with its closest skeleton point
        d = np.linalg.norm(uv[:, None, :] - sk[None, :, :], axis=2).min(axis=1)
        return {name: _stats(d) for name in SECTIONS}
    a = resample_uniform(uv, k)
    b = resample_uniform(sk, k)
    if pairing == "arc":
        d = np.linalg.norm(a - b, axis=1)
    else:
        d, _ = cKDTree(b).query(a)
    masks = section_masks(np.linspace(0.0, 1.0, k), fraction)
    return {name: _stats(d[m]) for name, m in masks.items()}


# --------------------------------------------------------------------------
# grid search


@dataclass(frozen=True)
class CellResult:
    eps_kappa: float
    eps_tau: float
    r_squared: float
    sse: float
    sse_normalized: float
    n_kappa: int
    n_tau: int
    error: str = ""

    def score_sse(self, sse_mode="unit_length"):
        return self.sse if sse_mode == "raw" else self.sse_normalized

    def to_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class GridIteration:
    bounds: tuple  # ((k_lo, k_hi), (t_lo, t_hi))
    eps_kappa: tuple
    eps_tau: tuple
    cells: tuple  # row-major over (eps_kappa, eps_tau)
    regions: tuple  # candidate ((k_lo, k_hi), (t_lo, t_hi)), best first

    def matrix(self, attr):
        return np.array([getattr(c, attr) for c in self.cells]).reshape(len(self.eps_kappa), len(self.eps_tau))

    def to_dict(self):
        return {
            "bounds": [list(b) for b in self.bounds],
            "eps_kappa": list(self.eps_kappa),
            "eps_tau": list(self.eps_tau),
            "cells": [c.to_dict() for c in self.cells],
            "regions": [[list(b) for b in r] for r in self.regions],
        }


@dataclass(frozen=True)
class GridSearchResult:
    best_eps_kappa: float
    best_eps_tau: float
    best: CellResult
    history: tuple
    converged: bool
    sse_mode: str = "unit_length"

    @property
    def iterations(self):
        return len(self.history)

    def to_dict(self):
        return {
            "best_eps_kappa": self.best_eps_kappa,
            "best_eps_tau": self.best_eps_tau,
            "best": self.best.to_dict(),
            "converged": self.converged,
            "sse_mode": self.sse_mode,
            "iterations": self.iterations,
            "history": [h.to_dict() for h in self.history],
        }


def meets_target(cell, r2_target=R2_TARGET, sse_target=SSE_TARGET, sse_mode="unit_length"):
    return cell.r_squared > r2_target and cell.score_sse(sse_mode) < sse_target


def _rank_key(cell, r2_target, sse_target, sse_mode):
    # every cell meeting the bar counts as tied: fewest segments, then larger
    # penalties, then SSE; below the bar the smallest SSE leads
    sse = cell.score_sse(sse_mode)
    sse = float(np.float32(sse)) if np.isfinite(sse) else np.inf
    if meets_target(cell, r2_target, sse_target, sse_mode):
        return (0, cell.n_kappa + cell.n_tau, -cell.eps_kappa, -cell.eps_tau, sse)
    return (1, sse, 0, -cell.eps_kappa, -cell.eps_tau)


def evaluate_cell(observed, series, eps_kappa, eps_tau, fit_norm="l1_of_l2fit", min_len=MIN_SEGMENT_LENGTH, midpoint=False):
    """Fit, reconstruct and score one penalty pair; failures give a cell with R² = -inf."""
    O = as_points(observed, 3)
    try:
        model = fit_pwc_series(series, O[0], eps_kappa, eps_tau, fit_norm, min_len)
        rec = reconstruct(model, O, midpoint=midpoint)
        m = goodness(rec.curve, O)
    except Filament3DError as exc:
        return CellResult(float(eps_kappa), float(eps_tau), -np.inf, np.inf, np.inf, 0, 0, f"{type(exc).__name__}: {exc}")
    return CellResult(float(eps_kappa), float(eps_tau), m.r_squared, m.sse, m.sse_normalized, len(model.kappa_segments), len(model.tau_segments))


def _axis(lo, hi, n):
    return np.array([lo]) if hi == lo else np.linspace(lo, hi, n)


def _region(values, i):
    lo = values[max(i - 1, 0)]
    hi = values[min(i + 1, len(values) - 1)]
    return (float(lo), float(hi))


def grid_search(
    observed,
    eps_kappa_range=EPS_KAPPA_RANGE,
    eps_tau_range=EPS_TAU_RANGE,
    grid=GRID,
    max_iters=6,
    n_regions=N_REGIONS,
    fit_norm="l1_of_l2fit",
    min_len=MIN_SEGMENT_LENGTH,
    midpoint=False,
    r2_target=R2_TARGET,
    sse_target=SSE_TARGET,
    sse_mode="unit_length",
    workers=1,
    eps_straight=None,
):
    """Iteratively refined grid search over the two penalties.

    Each iteration evaluates a ``grid`` x ``grid`` lattice spanning the
    current bounds, keeps the ``n_regions`` best cells as candidate regions
    (each cell plus its lattice neighbours) and recurses into the best one.
    Cells are ranked by meeting the (R², SSE) bar, then by SSE, with ties
    going to larger penalties. With ``sse_mode="unit_length"`` the SSE bar
    is applied to both curves scaled to unit observed length, so it does
    not depend on the length unit; ``"raw"`` uses the SSE as is. The search stops as soon as the best cell
    meets the bar, when the region can no longer shrink, or after
    ``max_iters`` iterations. Cell evaluations run on ``workers`` threads;
    results are gathered in lattice order, so the outcome does not depend
    on scheduling.
    """
    O = as_points(observed.points if isinstance(observed, Polyline3D) else observed, 3)
    (klo, khi), (tlo, thi) = (tuple(map(float, eps_kappa_range)), tuple(map(float, eps_tau_range)))
    if not (0 <= klo <= khi and 0 <= tlo <= thi):
        raise InvalidInput("penalty ranges must be non-empty, non-negative intervals")
    if grid < 2:
        raise InvalidInput("grid must be at least 2x2")
    if max_iters < 1:
        raise InvalidInput("max_iters must be at least 1")
    if sse_mode not in SSE_MODES:
        raise InvalidInput(f"sse_mode must be one of {SSE_MODES}")
    series = frenet_series(O) if eps_straight is None else frenet_series(O, eps_straight)
    history = []
    best = None
    bounds = ((klo, khi), (tlo, thi))
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for _ in range(max_iters):
            ks = _axis(*bounds[0], grid)
            ts = _axis(*bounds[1], grid)
            pairs = [(a, b) for a in ks for b in ts]

            def run(p):
                return evaluate_cell(O, series, p[0], p[1], fit_norm, min_len, midpoint)

            cells = list(pool.map(run, pairs)) if pool else [run(p) for p in pairs]
            order = sorted(range(len(cells)), key=lambda i: _rank_key(cells[i], r2_target, sse_target, sse_mode))
            regions = []
            for i in order[:n_regions]:
                a, b = divmod(i, len(ts))
                regions.append((_region(ks, a), _region(ts, b)))
            history.append(GridIteration(bounds, tuple(map(float, ks)), tuple(map(float, ts)), tuple(cells), tuple(regions)))
            top = cells[order[0]]
            if best is None or _rank_key(top, r2_target, sse_target, sse_mode) < _rank_key(best, r2_target, sse_target, sse_mode):
                best = top
            if meets_target(best, r2_target, sse_target, sse_mode) or regions[0] == bounds:
                break
            bounds = regions[0]
    finally:
        if pool:
            pool.shutdown()
    converged = meets_target(best, r2_target, sse_target, sse_mode)
    return GridSearchResult(best.eps_kappa, best.eps_tau, best, tuple(history), converged, sse_mode)


# --------------------------------------------------------------------------
# time-series analytics


@dataclass(frozen=True, eq=False)
class TipTrajectory:
    points: np.ndarray  # (n, 3)

    @property
    def xy(self):
        return self.points[:, [0, 1]]

    @property
    def yz(self):
        return self.points[:, [1, 2]]

    @property
    def xz(self):
        return self.points[:, [0, 2]]


def tip_trajectory(curves):
    """Last point of every curve in a time sequence, with its axis-plane projections."""
    curves = list(curves)
    if not curves:
        raise InvalidInput("need at least one curve")
    tips = np.array([as_points(c.points if isinstance(c, Polyline3D) else c, 3)[-1] for c in curves])
    return TipTrajectory(tips)


def breakpoint_density(models):
    """Interior breakpoint sample indices of κ and τ for each model of a sequence."""
    models = list(models)
    if not models:
        raise InvalidInput("need at least one model")
    return [
        {
            "kappa": [seg.start_index for seg in m.kappa_segments[1:]],
            "tau": [seg.start_index for seg in m.tau_segments[1:]],
        }
        for m in models
    ]


__all__ = [
    "CellResult",
    "FitMetrics",
    "GridIteration",
    "GridSearchResult",
    "TipTrajectory",
    "breakpoint_density",
    "evaluate_cell",
    "goodness",
    "grid_search",
    "meets_target",
    "reprojection_error",
    "section_masks",
    "tip_trajectory",
]

"""Cross-view matching of ordered skeletons and triangulation to 3D.

Views are brought into the reference image by their homographies, matched
point-to-point by a discrete Fréchet coupling, mapped back to their own
images and triangulated with a linear (DLT) solve over all views.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .curve import CameraModel, OrderedPolyline2D, Polyline3D, as_points, resample_uniform
from .errors import InvalidInput, ProjectionDegenerate, TriangulationDegenerate

K_SAMPLES = 200
RANK_TOL = 1e-10
EPIPOLAR_PRIOR = 1e-6
TANGENT_FLOOR = 0.05


@dataclass(frozen=True, eq=False)
class Coupling:
    """Monotone index coupling of two sequences (0-based indices).

    ``pairs`` is an (m, 2) integer array that starts at (0, 0), ends at
    (p - 1, q - 1) and advances each index by 0 or 1 per step, never both
    by 0.
    """

    pairs: np.ndarray
    frechet_distance: float

    def __post_init__(self):
        P = np.asarray(self.pairs, dtype=np.int64)
        if P.ndim != 2 or P.shape[1] != 2 or len(P) == 0:
            raise InvalidInput("pairs must be an (m, 2) array")
        if P[0, 0] != 0 or P[0, 1] != 0:
            raise InvalidInput("coupling must start at (0, 0)")
        steps = np.diff(P, axis=0)
        if np.any((steps < 0) | (steps > 1)) or np.any(steps.sum(axis=1) == 0):
            raise InvalidInput("coupling steps must advance each index by 0 or 1, not both by 0")
        P.setflags(write=False)
        object.__setattr__(self, "pairs", P)
        object.__setattr__(self, "frechet_distance", float(self.frechet_distance))

    def __len__(self):
        return len(self.pairs)

    def to_dict(self):
        return {"pairs": self.pairs.tolist(), "frechet_distance": self.frechet_distance}


def apply_homography(poly, H):
    """Map 2D points through a 3x3 homography, preserving their order."""
    H = np.asarray(H, dtype=float)
    if H.shape != (3, 3) or abs(np.linalg.det(H)) < 1e-300:
        raise InvalidInput("homography must be an invertible 3x3 matrix")
    pts = as_points(poly.points if isinstance(poly, OrderedPolyline2D) else poly, 2)
    xh = pts @ H[:, :2].T + H[:, 2]
    w = xh[:, 2]
    if np.any(np.abs(w) < 1e-12):
        raise ProjectionDegenerate("point maps to the line at infinity")
    out = xh[:, :2] / w[:, None]
    return OrderedPolyline2D(out) if isinstance(poly, OrderedPolyline2D) else out


def estimate_homography(src, dst):
    """Homography mapping ``src`` to ``dst`` from four or more point pairs.

    Normalized DLT: both point sets are shifted to their centroid and scaled
    to mean distance sqrt(2) before the SVD solve.
    """
    a = as_points(src, 2)
    b = as_points(dst, 2)
    if a.shape != b.shape or len(a) < 4:
        raise InvalidInput("need at least 4 matching point pairs")

    def normalizer(p):
        c = p.mean(axis=0)
        d = np.sqrt(((p - c) ** 2).sum(axis=1)).mean()
        if d == 0:
            raise InvalidInput("points are coincident")
        s = np.sqrt(2) / d
        return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])

    Ta, Tb = normalizer(a), normalizer(b)
    ah = np.column_stack([a, np.ones(len(a))]) @ Ta.T
    bh = np.column_stack([b, np.ones(len(b))]) @ Tb.T
    rows = []
    for (x, y, _), (u, v, _) in zip(ah, bh):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    _, S, Vt = np.linalg.svd(np.asarray(rows))
    if S[-2] < RANK_TOL * S[0]:
        raise InvalidInput("point configuration does not determine a homography")
    Hn = Vt[-1].reshape(3, 3)
    H = np.linalg.inv(Tb) @ Hn @ Ta
    return H / H[2, 2]


def discrete_frechet(sp, sq):
    """Discrete Fréchet distance and one optimal coupling.

    The table is filled by the standard recursion. Backtracking from the
    last cell picks the predecessor with the smallest table value; ties go
    to the diagonal step, then to the step that advances ``sq`` (the
    reference sequence), so the coupling is deterministic.
    """
    P = as_points(sp.points if isinstance(sp, OrderedPolyline2D) else sp)
    Q = as_points(sq.points if isinstance(sq, OrderedPolyline2D) else sq)
    if len(P) == 0 or len(Q) == 0:
        raise InvalidInput("empty polyline")
    if P.shape[1] != Q.shape[1]:
        raise InvalidInput("polylines have different dimensions")
    dist = np.sqrt(((P[:, None, :] - Q[None, :, :]) ** 2).sum(axis=2))
    ca = kernels.frechet_table(dist)
    i, j = len(P) - 1, len(Q) - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        cands = []
        if i > 0 and j > 0:
            cands.append((ca[i - 1, j - 1], 0, i - 1, j - 1))
        if j > 0:
            cands.append((ca[i, j - 1], 1, i, j - 1))
        if i > 0:
            cands.append((ca[i - 1, j], 2, i - 1, j))
        _, _, i, j = min(cands)
        path.append((i, j))
    return Coupling(np.array(path[::-1]), float(ca[-1, -1]))


def expand_coupling(coupling: Coupling, k):
    """Resample the coupling path to ``k`` fractional index pairs of equal path length."""
    P = coupling.pairs.astype(float)
    if len(P) == 1:
        return np.repeat(P, k, axis=0)
    s = np.concatenate(([0.0], np.cumsum(np.linalg.norm(np.diff(P, axis=0), axis=1))))
    t = np.linspace(0.0, s[-1], k)
    return np.column_stack([np.interp(t, s, P[:, 0]), np.interp(t, s, P[:, 1])])


def partner_indices(coupling: Coupling, n_ref):
    """Fractional index in the first sequence matched to each index of the second.

    Where the coupling advances only the first sequence, the indices of that
    run are averaged so each reference sample gets exactly one partner.
    """
    P = coupling.pairs
    sums = np.bincount(P[:, 1], weights=P[:, 0], minlength=n_ref)
    counts = np.bincount(P[:, 1], minlength=n_ref)
    return sums / np.maximum(counts, 1)


def sample_at(points, index):
    """Linear interpolation of a point sequence at fractional indices."""
    pts = as_points(points)
    idx = np.clip(np.asarray(index, dtype=float), 0, len(pts) - 1)
    lo = np.minimum(np.floor(idx).astype(int), len(pts) - 2) if len(pts) > 1 else np.zeros(len(idx), int)
    if len(pts) == 1:
        return np.repeat(pts, len(idx), axis=0)
    w = (idx - lo)[:, None]
    return (1 - w) * pts[lo] + w * pts[lo + 1]


def _dlt_systems(matched, cameras, weights=None):
    """Per-point DLT matrices in normalized image coordinates, shape (k, 2V, 4)."""
    rows = []
    for v, (uv, cam) in enumerate(zip(matched, cameras)):
        uv = as_points(uv, 2)
        xn = np.column_stack([uv, np.ones(len(uv))]) @ np.linalg.inv(cam.K).T
        xn = xn[:, :2] / xn[:, 2:3]
        Rt = cam.Rt
        w = 1.0 if weights is None else np.asarray(weights[v], dtype=float)[:, None]
        rows.append(w * (xn[:, 0:1] * Rt[2] - Rt[0]))
        rows.append(w * (xn[:, 1:2] * Rt[2] - Rt[1]))
    return np.stack(rows, axis=1)


def triangulate(matched, cameras, refine=False, iterations=5, weights=None):
    """Linear triangulation of corresponding points seen in two or more views.

    Parameters
    ----------
    matched : sequence of (k, 2) arrays
        Pixel coordinates in each view's own image, in corresponding order.
    cameras : sequence of CameraModel
    refine : bool
        Follow the DLT solve with Gauss-Newton steps on the pixel
        reprojection error.
    weights : sequence of (k,) arrays, optional
        Per-view, per-point row weights of the linear system.

    Raises TriangulationDegenerate when the rays of a point are (nearly)
    parallel, i.e. the DLT system has rank below 3.
    """
    if len(matched) != len(cameras) or len(cameras) < 2:
        raise InvalidInput("need matched points and a camera for each of at least 2 views")
    k = len(as_points(matched[0], 2))
    if any(len(as_points(m, 2)) != k for m in matched):
        raise InvalidInput("every view needs the same number of points")
    A = _dlt_systems(matched, cameras, weights)
    _, S, Vt = np.linalg.svd(A)
    if np.any(S[:, -2] < RANK_TOL * S[:, 0]):
        raise TriangulationDegenerate("rays are parallel; the views do not constrain depth")
    Xh = Vt[:, -1, :]
    if np.any(np.abs(Xh[:, 3]) < 1e-12 * np.abs(Xh[:, :3]).max(axis=1)):
        raise TriangulationDegenerate("point triangulates to infinity")
    X = Xh[:, :3] / Xh[:, 3:4]
    if refine:
        X = refine_points(X, matched, cameras, iterations, weights)
    return Polyline3D(X)


def refine_points(X, matched, cameras, iterations=5, weights=None):
    """Gauss-Newton refinement of each point's pixel reprojection error (independent per point)."""
    X = np.array(X, dtype=float)
    for _ in range(iterations):
        JtJ = np.zeros((len(X), 3, 3))
        Jtr = np.zeros((len(X), 3))
        for v, (uv, cam) in enumerate(zip(matched, cameras)):
            P = cam.P
            xh = X @ P[:, :3].T + P[:, 3]
            w = xh[:, 2:3]
            r = xh[:, :2] / w - as_points(uv, 2)
            J = (P[None, :2, :3] * w[:, :, None] - xh[:, :2, None] * P[None, 2:3, :3]) / (w[:, :, None] ** 2)
            if weights is not None:
                wt = np.asarray(weights[v], dtype=float)
                r = r * wt[:, None]
                J = J * wt[:, None, None]
            JtJ += np.einsum("nij,nik->njk", J, J)
            Jtr += np.einsum("nij,ni->nj", J, r)
        X -= np.linalg.solve(JtJ + 1e-12 * np.eye(3), Jtr[:, :, None])[:, :, 0]
    return X


def fundamental_matrix(cam_a: CameraModel, cam_b: CameraModel):
    """Fundamental matrix with ``x_b^T F x_a = 0`` for pixels of one 3D point."""
    C = np.append(cam_a.center, 1.0)
    e = cam_b.P @ C
    ex = np.array([[0, -e[2], e[1]], [e[2], 0, -e[0]], [-e[1], e[0], 0]])
    return ex @ cam_b.P @ np.linalg.pinv(cam_a.P)


def _backtrack(acc):
    """Monotone path through an accumulated table, ties to the diagonal."""
    i, j = acc.shape[0] - 1, acc.shape[1] - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        cands = []
        if i > 0 and j > 0:
            cands.append((acc[i - 1, j - 1], 0, i - 1, j - 1))
        if j > 0:
            cands.append((acc[i, j - 1], 1, i, j - 1))
        if i > 0:
            cands.append((acc[i - 1, j], 2, i - 1, j))
        _, _, i, j = min(cands)
        path.append((i, j))
    return np.array(path[::-1])


def epipolar_partners(ref_pts, pts, F, mapped=None, prior_weight=EPIPOLAR_PRIOR):
    """Fractional index into ``pts`` for each reference sample, by epipolar alignment.

    A monotone warp minimizes the summed squared distance of ``pts`` to the
    epipolar lines of the reference samples, plus ``prior_weight`` times the
    squared distance between ``mapped`` (``pts`` in the reference image)
    and the reference samples, which separates the several crossings a
    looping curve can have with one line. Each partner is then moved to the
    exact crossing of its epipolar line with the adjacent polyline segments,
    when one exists.
    """
    ref_pts = as_points(ref_pts, 2)
    pts = as_points(pts, 2)
    lines = np.column_stack([ref_pts, np.ones(len(ref_pts))]) @ F.T
    lines /= np.linalg.norm(lines[:, :2], axis=1, keepdims=True)
    d = pts @ lines[:, :2].T + lines[:, 2]  # (n, k_ref) signed distances
    cost = d**2
    if mapped is not None and prior_weight > 0:
        cost = cost + prior_weight * ((as_points(mapped, 2)[:, None, :] - ref_pts[None, :, :]) ** 2).sum(axis=2)
    path = _backtrack(kernels.warp_table(cost))
    guess = partner_indices(Coupling(path, 0.0), len(ref_pts))
    n = len(pts)
    out = guess.copy()
    for i, g in enumerate(guess):
        lo = max(0, int(np.floor(g)) - 1)
        hi = min(n - 1, int(np.ceil(g)) + 1)
        di = d[lo : hi + 1, i]
        seg = np.nonzero(np.sign(di[:-1]) != np.sign(di[1:]))[0]
        if len(seg) == 0:
            continue
        a, b = di[seg], di[seg + 1]
        cand = lo + seg + a / (a - b)
        out[i] = cand[np.argmin(np.abs(cand - g))]
    return out


def tangency_weights(pts, idx, ref_pts, F, floor=TANGENT_FLOOR):
    """Sine of the angle between each partner's epipolar line and the curve there.

    A partner found where the curve runs along its epipolar line is poorly
    located along the curve, so its view should count less in the
    triangulation. Values are clipped below at ``floor``.
    """
    pts = as_points(pts, 2)
    lines = np.column_stack([as_points(ref_pts, 2), np.ones(len(ref_pts))]) @ F.T
    n = lines[:, :2] / np.linalg.norm(lines[:, :2], axis=1, keepdims=True)
    seg = np.clip(np.floor(idx).astype(int), 0, len(pts) - 2)
    t = pts[np.minimum(seg + 2, len(pts) - 1)] - pts[np.maximum(seg - 1, 0)]
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    return np.maximum(np.abs(np.einsum("ij,ij->i", t, n)), floor)


@dataclass(frozen=True, eq=False)
class MatchResult:
    curve: Polyline3D
    couplings: dict
    resampled: list
    matched: list
    reference: int


def match_views(skeletons, cameras, k=K_SAMPLES, reference=1, refine=False, epipolar=True):
    """Resample, couple against the reference view and triangulate.

    Every view is resampled to ``k`` points. Non-reference views are mapped
    into the reference image by their homography and coupled to the
    reference by discrete Fréchet matching; each reference sample receives
    one (fractional) partner index per view. The partners are taken from the
    view's own resampled points, so triangulation uses original pixels.

    With ``epipolar=True`` the partners are re-aligned so that each lies on
    the epipolar line of its reference sample (see
    :func:`epipolar_partners`), with the homography mapping as a weak prior.
    The homography is exact only for points on its plane, so the plain
    coupling slips along the curve where the curve has depth relief.
    Each view's rows in the triangulation are then weighted by
    :func:`tangency_weights`.
    """
    if len(skeletons) != len(cameras):
        raise InvalidInput("need one camera per skeleton")
    if len(skeletons) < 2:
        raise InvalidInput("need at least two views")
    if not 0 <= reference < len(skeletons):
        raise InvalidInput("reference index out of range")
    res = [resample_uniform(sk.points if isinstance(sk, OrderedPolyline2D) else sk, k) for sk in skeletons]
    ref = res[reference]
    couplings = {}
    matched = []
    weights = []
    for v, (pts, cam) in enumerate(zip(res, cameras)):
        if v == reference:
            matched.append(ref)
            weights.append(np.ones(k))
            continue
        mapped = apply_homography(pts, cam.H)
        c = discrete_frechet(mapped, ref)
        couplings[v] = c
        if epipolar:
            F = fundamental_matrix(cameras[reference], cam)
            idx = epipolar_partners(ref, pts, F, mapped)
            weights.append(tangency_weights(pts, idx, ref, F))
        else:
            idx = partner_indices(c, k)
            weights.append(np.ones(k))
        matched.append(sample_at(pts, idx))
    curve = triangulate(matched, cameras, refine=refine, weights=weights)
    return MatchResult(curve, couplings, res, matched, reference)


def correspond_and_triangulate(skeletons, cameras, k=K_SAMPLES, reference=1, refine=False, epipolar=True):
    """Three ordered skeletons plus cameras to a 3D polyline of ``k`` points."""
    return match_views(skeletons, cameras, k=k, reference=reference, refine=refine, epipolar=epipolar).curve


__all__ = [
    "Coupling",
    "CameraModel",
    "MatchResult",
    "apply_homography",
    "correspond_and_triangulate",
    "discrete_frechet",
    "epipolar_partners",
    "estimate_homography",
    "expand_coupling",
    "fundamental_matrix",
    "match_views",
    "partner_indices",
    "refine_points",
    "sample_at",
    "tangency_weights",
    "triangulate",
]

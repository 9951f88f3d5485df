"""Ground-truth generators and brute-force reference implementations.

Everything here is deterministic given a seed and exists so that every
pipeline stage can be checked without measured data: forward-integrated
piece-wise clothoids, a three-camera rig, rasterized skeletons with known
traversal order, and exhaustive oracles for the two dynamic programs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .curve import CameraModel, OrderedPolyline2D, Polyline3D, as_points, resample_uniform
from .errors import FrustumViolation, InvalidInput, TooLarge
from .ordering import PixelSet
from .pwc import MIN_SEGMENT_LENGTH, LinearSegment, PwcModel

FOCAL = 1400.0
PRINCIPAL = (960.0, 540.0)
IMAGE_SIZE = (1920, 1080)
STANDOFF = 500.0
YAWS_DEG = (-60.0, 0.0, 60.0)
REFERENCE_VIEW = 1
MIN_FINE_STEPS = 2000
RASTER_STEP = 3.0


# --------------------------------------------------------------------------
# piece-wise clothoid generator


def _as_segments(pieces, breaks, length):
    """(intercept, slope) pairs plus interior break positions -> LinearSegment list."""
    if pieces and isinstance(pieces[0], LinearSegment):
        return list(pieces)
    pieces = [tuple(map(float, p)) for p in pieces]
    if not pieces:
        raise InvalidInput("need at least one piece")
    breaks = [] if breaks is None else [float(b) for b in breaks]
    if len(breaks) != len(pieces) - 1:
        raise InvalidInput(f"{len(pieces)} pieces need {len(pieces) - 1} interior breaks")
    knots = [0.0] + breaks + [float(length)]
    if np.any(np.diff(knots) <= 0):
        raise InvalidInput("breaks must be strictly increasing inside (0, length)")
    return [LinearSegment(0, 0, b, a, 0.0, knots[i], knots[i + 1]) for i, (a, b) in enumerate(pieces)]


def pwc_model(kappa_pieces, tau_pieces, length, kappa_breaks=None, tau_breaks=None):
    """Build a model from ``(intercept, slope)`` pieces in global arc length.

    The frame starts canonical (T = x, N = y, B = z) at the origin.
    """
    if not length > 0:
        raise InvalidInput("length must be positive")
    ks = _as_segments(kappa_pieces, kappa_breaks, length)
    ts = _as_segments(tau_pieces, tau_breaks, length)
    return PwcModel(ks, ts, np.array([0.0, float(length)]), np.eye(3), np.zeros(3), (0.0, 0.0), "l1_of_l2fit")


def integrate_model(model, n, min_steps=MIN_FINE_STEPS, step=None, midpoint=False):
    """Forward-integrate ``model`` on a fine grid and return ``n`` evenly spaced samples.

    The fine grid has a whole number of steps between output samples and at
    least ``min_steps`` steps in total; ``step`` forces an approximate fine
    step length instead.
    """
    if n < 2:
        raise InvalidInput("n must be at least 2")
    L = model.length
    if step is None:
        sub = max(1, math.ceil(min_steps / (n - 1)))
    else:
        sub = max(1, int(round(L / ((n - 1) * step))))
    m = (n - 1) * sub
    h = L / m
    s = model.arclength[0] + h * np.arange(m)
    s_eval = s + (0.5 * h if midpoint else 0.0)
    frames, _ = kernels.integrate_frames(model.kappa_at(s_eval), model.tau_at(s_eval), h, np.asarray(model.initial_frame, float))
    T = frames[:, 0]
    pts = np.vstack([model.initial_point, model.initial_point + np.cumsum(0.5 * h * (T[1:] + T[:-1]), axis=0)])
    return Polyline3D(pts[::sub].copy())


def gen_pwc_curve(kappa_segments, tau_segments, length, n, kappa_breaks=None, tau_breaks=None, min_steps=MIN_FINE_STEPS, step=None, midpoint=False):
    """Generate a piece-wise clothoid polyline with ``n`` samples.

    Parameters
    ----------
    kappa_segments, tau_segments : sequence of (intercept, slope) or LinearSegment
        Linear pieces in global arc length, e.g. ``[(0.5, 0.0)]`` for
        constant curvature 0.5.
    length : float
        Total arc length.
    n : int
        Number of output samples.
    kappa_breaks, tau_breaks : sequence of float, optional
        Interior break positions when more than one piece is given.

    Examples
    --------
    >>> c = gen_pwc_curve([(0.5, 0.0)], [(0.0, 0.0)], 4 * np.pi, 400)
    >>> bool(np.linalg.norm(c.points[-1] - c.points[0]) < 1e-3)
    True
    """
    model = pwc_model(kappa_segments, tau_segments, length, kappa_breaks, tau_breaks)
    return integrate_model(model, n, min_steps=min_steps, step=step, midpoint=midpoint)


def helix_points(r, c, n, turns=1.0):
    """Analytic helix ``(r cos t, r sin t, c t)`` sampled uniformly in ``t``."""
    t = np.linspace(0.0, 2 * np.pi * turns, n)
    return np.column_stack([r * np.cos(t), r * np.sin(t), c * t])


# --------------------------------------------------------------------------
# cameras and scenes


def look_at_camera(center, target, f=FOCAL, principal=PRINCIPAL, down=(0.0, 1.0, 0.0)):
    """Pinhole camera at ``center`` looking at ``target`` with image v along ``down``."""
    center = np.asarray(center, dtype=float)
    z = np.asarray(target, dtype=float) - center
    z /= np.linalg.norm(z)
    y = np.asarray(down, dtype=float)
    y = y - y.dot(z) * z
    y /= np.linalg.norm(y)
    x = np.cross(y, z)
    R = np.array([x, y, z])
    K = np.array([[f, 0.0, principal[0]], [0.0, f, principal[1]], [0.0, 0.0, 1.0]])
    return CameraModel(K, np.column_stack([R, -R @ center]))


def plane_homography(cam_src, cam_dst, normal, point):
    """Homography induced by the world plane ``normal . (X - point) = 0``.

    Maps pixels of ``cam_src`` to pixels of ``cam_dst`` for points on the
    plane.
    """
    n_w = np.asarray(normal, dtype=float)
    n_w = n_w / np.linalg.norm(n_w)
    R1, t1 = cam_src.R, cam_src.t
    R2, t2 = cam_dst.R, cam_dst.t
    R = R2 @ R1.T
    t = t2 - R @ t1
    n_c = R1 @ n_w
    d = n_c.dot(R1 @ np.asarray(point, dtype=float) + t1)
    if abs(d) < 1e-12:
        raise InvalidInput("plane passes through the source camera centre")
    H = cam_dst.K @ (R + np.outer(t, n_c) / d) @ np.linalg.inv(cam_src.K)
    return H / H[2, 2]


def default_cameras(target=(0.0, 0.0, 0.0), standoff=STANDOFF, yaws_deg=YAWS_DEG, f=FOCAL, principal=PRINCIPAL, reference=REFERENCE_VIEW):
    """Cameras on a horizontal circle around ``target``, 60 degrees apart by default.

    Each camera carries the homography to the reference view induced by the
    plane through ``target`` facing the reference camera.
    """
    target = np.asarray(target, dtype=float)
    cams = []
    for yaw in yaws_deg:
        a = math.radians(yaw)
        center = target + standoff * np.array([math.sin(a), 0.0, -math.cos(a)])
        cams.append(look_at_camera(center, target, f, principal))
    ref = cams[reference]
    normal = ref.R[2]
    out = []
    for i, cam in enumerate(cams):
        H = np.eye(3) if i == reference else plane_homography(cam, ref, normal, target)
        out.append(cam.with_homography(H))
    return out


@dataclass(frozen=True, eq=False)
class SyntheticScene:
    truth_curve: Polyline3D
    cameras: list
    pixel_noise_sigma: float = 0.0
    seed: int = 0
    reference: int = REFERENCE_VIEW
    meta: dict = field(default_factory=dict)


def _align(points, axis, target=(0.0, 1.0, 0.0)):
    """Rotate ``points`` about the origin so that ``axis`` points along ``target``."""
    a = np.asarray(axis, dtype=float) / np.linalg.norm(axis)
    b = np.asarray(target, dtype=float) / np.linalg.norm(target)
    v = np.cross(a, b)
    c = float(a.dot(b))
    if np.linalg.norm(v) < 1e-15:
        R = np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    else:
        vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
        R = np.eye(3) + vx + vx @ vx / (1 + c)
    return as_points(points, 3) @ R.T


def scene_curve(kind, n=1000):
    """Named test curves in millimetres, sized for the default rig.

    ``helix``: constant curvature and torsion 0.05/mm (radius and pitch
    parameter 10 mm), 120 mm long, axis along the image vertical.
    ``clothoid``: two continuous linear pieces in both curvature and
    torsion over 150 mm. ``euler``: planar spiral, curvature 0.005 + 0.0004 s.
    """
    if kind == "helix":
        c = gen_pwc_curve([(0.05, 0.0)], [(0.05, 0.0)], 120.0, n)
        # the helix axis is along T + B of the start frame for equal curvature and torsion
        return Polyline3D(_align(c.points, (1.0, 0.0, 1.0)))
    if kind == "clothoid":
        return gen_pwc_curve(
            [(0.005, 0.0004), (0.0425, -0.0001)], [(0.004, 0.0), (0.012, -0.0001)], 150.0, n, kappa_breaks=[75.0], tau_breaks=[80.0]
        )
    if kind == "euler":
        return gen_pwc_curve([(0.005, 0.0004)], [(0.0, 0.0)], 150.0, n)
    raise InvalidInput(f"unknown scene curve {kind!r}; choose helix, clothoid or euler")


SCENE_KINDS = ("helix", "clothoid", "euler")


def curling_sequence(n_frames=10, n=1000, length=150.0, kappa_tip=(0.01, 0.08), torsion=0.004):
    """A tendril that curls up over time: tip curvature ramps linearly across frames.

    Every frame starts at the same base point with the same initial frame;
    curvature grows linearly from 0.002/mm at the base to the frame's tip
    value. Returns a list of Polyline3D.
    """
    if n_frames < 1:
        raise InvalidInput("need at least one frame")
    tips = np.linspace(kappa_tip[0], kappa_tip[1], n_frames) if n_frames > 1 else np.array([kappa_tip[0]])
    k0 = 0.002
    return [gen_pwc_curve([(k0, (kt - k0) / length)], [(torsion, 0.0)], length, n) for kt in tips]


def make_scene(curve, sigma=0.0, seed=0, center=True, cameras=None, **camera_kw):
    """Wrap a 3D curve into a scene; by default the curve centroid is moved to the origin."""
    pts = as_points(curve.points if isinstance(curve, Polyline3D) else curve, 3)
    if center:
        pts = pts - pts.mean(axis=0)
    cams = default_cameras(**camera_kw) if cameras is None else list(cameras)
    return SyntheticScene(Polyline3D(pts), cams, float(sigma), int(seed))


def project_points(curve, camera):
    """Pinhole projection; raises FrustumViolation for points not in front of the camera."""
    pts = as_points(curve.points if isinstance(curve, Polyline3D) else curve, 3)
    if np.any(camera.depth(pts) <= 1e-9):
        raise FrustumViolation("curve point behind or on the camera plane")
    return camera.project(pts)


def project_scene(scene: SyntheticScene, rasterize=False, shuffle_seed=None, raster_step=RASTER_STEP):
    """Project the truth curve into every view and add Gaussian pixel noise.

    Returns the list of noisy ordered polylines; with ``rasterize=True`` a
    second list of ``(PixelSet, generator order)`` pairs is returned too.
    The rasterized skeleton is drawn through noisy vertices spaced about
    ``raster_step`` pixels apart along the clean projection, so the noise
    bends the skeleton without folding it back on itself.
    """
    rng = np.random.default_rng(scene.seed)
    views = []
    clean = []
    for cam in scene.cameras:
        uv = project_points(scene.truth_curve, cam)
        clean.append(uv)
        if scene.pixel_noise_sigma > 0:
            uv = uv + rng.normal(0.0, scene.pixel_noise_sigma, size=uv.shape)
        keep = np.concatenate(([True], np.any(np.diff(uv, axis=0) != 0, axis=1)))
        views.append(OrderedPolyline2D(uv[keep]))
    if not rasterize:
        return views
    srng = np.random.default_rng(scene.seed if shuffle_seed is None else shuffle_seed)
    rasters = []
    for uv in clean:
        L = float(np.sum(np.linalg.norm(np.diff(uv, axis=0), axis=1)))
        verts = resample_uniform(uv, max(2, int(math.ceil(L / raster_step)) + 1))
        if scene.pixel_noise_sigma > 0:
            verts = verts + srng.normal(0.0, scene.pixel_noise_sigma, size=verts.shape)
        px = rasterize_polyline(verts)
        rasters.append((pixelset_from_order(px, srng), px))
    return views, rasters


# --------------------------------------------------------------------------
# rasterization


def bresenham(p0, p1):
    """Integer pixels of the 8-connected line from ``p0`` to ``p1`` inclusive."""
    x0, y0 = int(p0[0]), int(p0[1])
    x1, y1 = int(p1[0]), int(p1[1])
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    out = []
    while True:
        out.append((x0, y0))
        if x0 == x1 and y0 == y1:
            return out
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def _drop_corners(path):
    """Remove L-corner pixels (a pixel whose neighbours in the path touch diagonally)."""
    out = list(path)
    changed = True
    while changed:
        changed = False
        i = 1
        while i < len(out) - 1:
            a, b = out[i - 1], out[i + 1]
            if a != b and max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1:
                del out[i]
                changed = True
            else:
                i += 1
    return out


def rasterize_polyline(points):
    """Thin 8-connected pixel path through consecutive rounded points.

    Returns the pixel sequence in generator order. A pixel may appear more
    than once if the curve revisits it (at a self-crossing).
    """
    P = np.rint(np.asarray(points, dtype=float)).astype(int)
    path = [tuple(P[0])]
    for a, b in zip(P[:-1], P[1:]):
        seg = bresenham(a, b)
        for q in seg[1:]:
            if q != path[-1]:
                path.append(q)
    return _drop_corners(path)


def pixelset_from_order(order, rng=None):
    """PixelSet of an ordered pixel path, starting at its first pixel."""
    pixels = list(dict.fromkeys(map(tuple, order)))
    if rng is not None:
        rng.shuffle(pixels)
    return PixelSet(frozenset(pixels), tuple(order[0]))


def generator_rank(order):
    """Pixel -> first visit index, plus the set of pixels visited more than once."""
    rank, repeated = {}, set()
    for i, p in enumerate(map(tuple, order)):
        if p in rank:
            repeated.add(p)
        else:
            rank[p] = i
    return rank, repeated


def kendall_tau_order(output, order):
    """Kendall rank correlation between an ordering and the generator order.

    Pixels visited more than once by the generator have no well-defined
    rank and are left out.
    """
    rank, repeated = generator_rank(order)
    r = np.array([rank[tuple(map(int, p))] for p in np.asarray(output) if tuple(map(int, p)) not in repeated])
    n = len(r)
    if n < 2:
        return 1.0
    concordant = discordant = 0
    for i in range(n - 1):
        d = np.sign(r[i + 1 :] - r[i])
        concordant += int(np.count_nonzero(d > 0))
        discordant += int(np.count_nonzero(d < 0))
    return (concordant - discordant) / (n * (n - 1) / 2)


# --------------------------------------------------------------------------
# planar test shapes for ordering


def _planar_from_curvature(kappa_fn, length, step, rng):
    n = max(2, int(math.ceil(length / step)) + 1)
    s = np.linspace(0.0, length, n)
    k = kappa_fn(s)
    theta = np.concatenate(([0.0], np.cumsum(0.5 * (k[1:] + k[:-1]) * np.diff(s))))
    theta += rng.uniform(0, 2 * np.pi)
    d = np.column_stack([np.cos(theta), np.sin(theta)])
    xy = np.vstack([[0.0, 0.0], np.cumsum(0.5 * (d[1:] + d[:-1]) * np.diff(s)[:, None], axis=0)])
    return xy


def _place(xy, rng, margin=20.0):
    lo = xy.min(axis=0)
    return xy - lo + margin + rng.uniform(0, 1, size=2)


def simple_curve_2d(rng, length=None, step=0.25):
    """Euler-spiral arc with total turning below 270 degrees (never self-intersecting)."""
    L = rng.uniform(150.0, 300.0) if length is None else float(length)
    turning = rng.uniform(0.3, 4.5) * rng.choice([-1.0, 1.0])
    w = rng.uniform(0.0, 1.0)
    k0 = turning * w / L
    k1 = 2.0 * turning * (1.0 - w) / L**2
    return _place(_planar_from_curvature(lambda s: k0 + k1 * s, L, step, rng), rng)


def _nodal(t):
    return np.column_stack([t * t - 1.0, t * t * t - t])


def _nodal_arc(t0, t1, step_param=1e-3):
    t = np.arange(t0, t1, step_param)
    return t, _nodal(t)


def loop_curve_2d(rng, kind="loop_at_tip", scale=None, tail=None):
    """Nodal cubic ``(t^2 - 1, t^3 - t)`` under a random similarity and mild shear.

    The curve crosses itself at ``t = -1, 1``. ``kind="loop_at_tip"`` ends a
    few pixels past the crossing; ``"loop_interior"`` continues with a tail of
    ``tail`` pixels (30 to 60 by default).
    """
    S = rng.uniform(45.0, 80.0) if scale is None else float(scale)
    a = rng.uniform(0.85, 1.15)
    th = rng.uniform(0, 2 * np.pi)
    Rm = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    A = Rm @ np.diag([S * a, S / a])
    if rng.random() < 0.5:
        A = A @ np.diag([1.0, -1.0])
    if tail is None:
        tail = rng.uniform(4.0, 7.0) if kind == "loop_at_tip" else rng.uniform(30.0, 60.0)
    t0 = -rng.uniform(1.45, 1.75)
    # extend past t = 1 until the tail reaches the requested arc length
    t, xy = _nodal_arc(t0, 3.0, 2e-4)
    xy = xy @ A.T
    seg = np.linalg.norm(np.diff(xy, axis=0), axis=1)
    s = np.concatenate(([0.0], np.cumsum(seg)))
    s_cross = np.interp(1.0, t, s)
    end = np.searchsorted(s, s_cross + tail)
    xy = xy[: end + 1]
    # thin to ~0.25 px spacing before rasterization
    keep = np.concatenate(([0], np.flatnonzero(np.diff(np.floor(s[: end + 1] / 0.25)) > 0), [end]))
    return _place(xy[np.unique(keep)], rng)


def ordering_case(kind, rng):
    """Rasterized shape of the given topology: ``(PixelSet, generator pixel order)``."""
    if kind == "simple":
        xy = simple_curve_2d(rng)
    elif kind in ("loop_at_tip", "loop_interior"):
        xy = loop_curve_2d(rng, kind)
    else:
        raise InvalidInput(f"unknown topology {kind!r}")
    order = rasterize_polyline(xy)
    return pixelset_from_order(order, rng), order


# --------------------------------------------------------------------------
# brute-force oracles


def _compositions(n, min_len):
    """All ways to cut ``range(n)`` into consecutive blocks of at least ``min_len``."""
    if n == 0:
        yield ()
        return
    for first in range(min_len, n + 1):
        for rest in _compositions(n - first, min_len):
            yield (first,) + rest


def brute_force_partition(s, y, epsilon, fit_norm="l1_of_l2fit", min_len=MIN_SEGMENT_LENGTH):
    """Exhaustive minimum of ``sum(epsilon + E_fit)`` over all contiguous partitions.

    Each block is fitted independently with ``numpy.linalg.lstsq``. Series
    shorter than ``min_len`` form a single block.

    Returns ``(cost, starts)``.
    """
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(s)
    if n > 30:
        raise TooLarge(f"series of length {n} exceeds the brute-force limit of 30")
    if n < 2:
        raise InvalidInput("need at least 2 samples")
    min_len = min(min_len, n)
    cache = {}

    def block(i, j):
        if (i, j) not in cache:
            A = np.column_stack([s[i:j], np.ones(j - i)])
            coef = np.linalg.lstsq(A, y[i:j], rcond=None)[0]
            r = y[i:j] - A @ coef
            cache[(i, j)] = float(np.abs(r).sum() if fit_norm == "l1_of_l2fit" else r.dot(r))
        return cache[(i, j)]

    best = (math.inf, None)
    for comp in _compositions(n, min_len):
        starts = np.concatenate(([0], np.cumsum(comp)[:-1]))
        cost = sum(epsilon + block(a, a + w) for a, w in zip(starts, comp))
        if cost < best[0]:
            best = (cost, tuple(int(a) for a in starts))
    return best


def brute_force_frechet(sp, sq):
    """Discrete Fréchet distance by enumerating every monotone coupling.

    Plain recursion over coupling paths, without memoization.
    """
    P = as_points(sp)
    Q = as_points(sq)
    if len(P) * len(Q) > 64:
        raise TooLarge("brute-force Fréchet is limited to |sp| * |sq| <= 64")
    if len(P) == 0 or len(Q) == 0:
        raise InvalidInput("empty polyline")
    p, q = len(P) - 1, len(Q) - 1

    def d(i, j):
        return float(np.sqrt(((P[i] - Q[j]) ** 2).sum()))

    def walk(i, j, worst):
        worst = max(worst, d(i, j))
        if i == p and j == q:
            return worst
        best = math.inf
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            if i + di <= p and j + dj <= q:
                best = min(best, walk(i + di, j + dj, worst))
        return best

    return walk(0, 0, 0.0)


def count_couplings(p, q):
    """Number of monotone couplings between sequences of length ``p`` and ``q`` (Delannoy)."""
    return sum(math.comb(p - 1, k) * math.comb(q - 1, k) * 2**k for k in range(min(p, q)))


__all__ = [
    "SCENE_KINDS",
    "SyntheticScene",
    "brute_force_frechet",
    "brute_force_partition",
    "bresenham",
    "count_couplings",
    "curling_sequence",
    "default_cameras",
    "gen_pwc_curve",
    "helix_points",
    "integrate_model",
    "kendall_tau_order",
    "look_at_camera",
    "loop_curve_2d",
    "make_scene",
    "ordering_case",
    "pixelset_from_order",
    "plane_homography",
    "project_scene",
    "pwc_model",
    "rasterize_polyline",
    "scene_curve",
    "simple_curve_2d",
]

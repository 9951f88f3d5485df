import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from filament3d.correspondence import (
    Coupling,
    apply_homography,
    correspond_and_triangulate,
    discrete_frechet,
    estimate_homography,
    expand_coupling,
    match_views,
    triangulate,
)
from filament3d.curve import OrderedPolyline2D, resample_uniform
from filament3d.errors import InvalidInput, ProjectionDegenerate, TriangulationDegenerate
from filament3d.synthetic import (
    brute_force_frechet,
    default_cameras,
    make_scene,
    plane_homography,
    project_points,
    project_scene,
    scene_curve,
)


def dist_to_polyline(X, P):
    """Distance from each row of X to the polyline P (point-to-segment)."""
    a, b = P[:-1], P[1:]
    ab = b - a
    t = np.einsum("mij,ij->mi", X[:, None, :] - a[None], ab) / np.einsum("ij,ij->i", ab, ab)
    t = np.clip(t, 0.0, 1.0)
    foot = a[None] + t[..., None] * ab[None]
    return np.linalg.norm(X[:, None, :] - foot, axis=2).min(axis=1)


# ---------------------------------------------------------------- homography


def test_identity_homography():
    pts = np.random.default_rng(0).uniform(0, 100, (20, 2))
    assert np.array_equal(apply_homography(pts, np.eye(3)), pts)


def test_translation_homography():
    pts = np.random.default_rng(0).uniform(0, 100, (20, 2))
    H = np.array([[1.0, 0, 5], [0, 1, -2], [0, 0, 1]])
    out = apply_homography(OrderedPolyline2D(pts), H)
    assert np.allclose(out.points, pts + [5, -2], atol=1e-12)


def test_homography_to_infinity():
    H = np.array([[1.0, 0, 0], [0, 1, 0], [1, 0, -1]])
    with pytest.raises(ProjectionDegenerate):
        apply_homography(np.array([[1.0, 3.0]]), H)


def test_estimated_homography_round_trip():
    cams = default_cameras()
    corners = np.array([[-20.0, -20, 0], [20, -20, 0], [20, 20, 0], [-20, 20, 0]])
    src = project_points(corners, cams[0])
    dst = project_points(corners, cams[1])
    H = estimate_homography(src, dst)
    assert np.max(np.abs(apply_homography(src, H) - dst)) < 1e-9
    # a fifth point on the same plane is mapped correctly as well
    extra = np.array([[7.0, -3.0, 0.0]])
    assert np.max(np.abs(apply_homography(project_points(extra, cams[0]), H) - project_points(extra, cams[1]))) < 1e-8


def test_plane_homography_matches_estimate():
    cams = default_cameras()
    n = np.array([0.0, 0.0, 1.0])
    H = plane_homography(cams[2], cams[1], n, (0, 0, 0))
    rng = np.random.default_rng(3)
    X = np.column_stack([rng.uniform(-30, 30, (6, 2)), np.zeros(6)])
    a, b = project_points(X, cams[2]), project_points(X, cams[1])
    assert np.allclose(apply_homography(a, H), b, atol=1e-8)


def test_estimate_homography_needs_four_pairs():
    with pytest.raises(InvalidInput):
        estimate_homography(np.zeros((3, 2)), np.zeros((3, 2)))


# ---------------------------------------------------------------- Fréchet


def test_frechet_identical_is_diagonal():
    p = np.random.default_rng(1).normal(size=(9, 2))
    c = discrete_frechet(p, p)
    assert c.frechet_distance == 0.0
    assert c.pairs.tolist() == [[i, i] for i in range(9)]


def test_frechet_parallel_segments():
    c = discrete_frechet([(0, 0), (1, 0)], [(0, 1), (1, 1)])
    assert c.frechet_distance == 1.0


def test_frechet_matches_brute_force_8x7():
    rng = np.random.default_rng(11)
    for _ in range(20):
        p, q = rng.uniform(0, 10, (8, 2)), rng.uniform(0, 10, (7, 2))
        assert discrete_frechet(p, q).frechet_distance == brute_force_frechet(p, q)


def test_frechet_empty_rejected():
    with pytest.raises(InvalidInput):
        discrete_frechet(np.zeros((0, 2)), np.zeros((3, 2)))


def test_coupling_rejects_bad_steps():
    with pytest.raises(InvalidInput):
        Coupling(np.array([[0, 0], [2, 1]]), 0.0)
    with pytest.raises(InvalidInput):
        Coupling(np.array([[0, 0], [0, 0]]), 0.0)
    with pytest.raises(InvalidInput):
        Coupling(np.array([[1, 0], [2, 1]]), 0.0)


def test_expand_coupling_count_and_ends():
    c = discrete_frechet(np.random.default_rng(2).normal(size=(9, 2)), np.random.default_rng(3).normal(size=(5, 2)))
    e = expand_coupling(c, 30)
    assert e.shape == (30, 2)
    assert e[0].tolist() == [0, 0] and e[-1].tolist() == [8, 4]
    assert np.all(np.diff(e, axis=0) >= -1e-12)


small_pl = st.integers(1, 8).flatmap(
    lambda n: arrays(np.float64, (n, 2), elements=st.floats(-50, 50, allow_nan=False))
)


@settings(max_examples=80, deadline=None)
@given(small_pl, small_pl)
def test_frechet_symmetric(p, q):
    assert discrete_frechet(p, q).frechet_distance == discrete_frechet(q, p).frechet_distance


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 10).flatmap(lambda n: arrays(np.float64, (2, n, 2), elements=st.floats(-50, 50))))
def test_frechet_at_most_diagonal(pq):
    p, q = pq
    diag = np.linalg.norm(p - q, axis=1).max()
    assert discrete_frechet(p, q).frechet_distance <= diag


@settings(max_examples=80, deadline=None)
@given(small_pl, small_pl)
def test_coupling_invariants(p, q):
    c = discrete_frechet(p, q)
    P = c.pairs
    assert P[0].tolist() == [0, 0]
    assert P[-1].tolist() == [len(p) - 1, len(q) - 1]
    steps = np.diff(P, axis=0)
    assert np.all((steps >= 0) & (steps <= 1)) and np.all(steps.sum(axis=1) > 0)
    # the returned coupling attains the distance
    assert np.linalg.norm(p[P[:, 0]] - q[P[:, 1]], axis=1).max() == c.frechet_distance


# ---------------------------------------------------------------- triangulation


def _pair_cameras():
    return default_cameras(target=(0.0, 0.0, 1000.0), yaws_deg=(-30.0, 30.0), reference=0)


def test_triangulate_exact_point():
    cams = _pair_cameras()
    X = np.array([[0.0, 0.0, 1000.0]])
    out = triangulate([project_points(X, c) for c in cams], cams)
    assert np.linalg.norm(out.points[0] - X[0]) < 1e-6


def test_triangulate_noisy_median_error():
    cams = _pair_cameras()
    X = np.array([[0.0, 0.0, 1000.0]])
    rng = np.random.default_rng(4)
    err = []
    for _ in range(100):
        obs = [project_points(X, c) + rng.normal(0, 0.5, (1, 2)) for c in cams]
        err.append(np.linalg.norm(triangulate(obs, cams).points[0] - X[0]))
    assert np.median(err) < 5.0


def test_triangulate_reprojects_onto_inputs():
    cams = default_cameras()
    X = np.random.default_rng(5).uniform(-30, 30, (50, 3))
    obs = [project_points(X, c) for c in cams]
    out = triangulate(obs, cams, refine=True)
    for uv, c in zip(obs, cams):
        assert np.max(np.abs(project_points(out, c) - uv)) < 1e-6


def test_triangulate_duplicate_cameras_degenerate():
    cam = default_cameras()[1]
    X = np.random.default_rng(6).uniform(-30, 30, (10, 3))
    uv = project_points(X, cam)
    with pytest.raises(TriangulationDegenerate):
        triangulate([uv, uv, uv], [cam, cam, cam])


def test_triangulate_needs_equal_counts():
    cams = default_cameras()
    with pytest.raises(InvalidInput):
        triangulate([np.zeros((3, 2)), np.zeros((4, 2)), np.zeros((3, 2))], cams)


def _exact_views(kind):
    scene = make_scene(scene_curve(kind))
    return scene, project_scene(scene)


def test_helix_three_views_rms_below_tenth_percent():
    scene, views = _exact_views("helix")
    curve = correspond_and_triangulate(views, scene.cameras, k=200)
    truth = scene.truth_curve.points
    d = dist_to_polyline(curve.points, truth)
    assert np.sqrt(np.mean(d**2)) < 1e-3 * scene.truth_curve.length


def test_clothoid_three_views_pointwise_below_tenth_percent():
    scene, views = _exact_views("clothoid")
    curve = correspond_and_triangulate(views, scene.cameras, k=200)
    d = dist_to_polyline(curve.points, scene.truth_curve.points)
    assert d.max() < 1e-3 * scene.truth_curve.length


def test_straight_segment_is_collinear():
    t = np.linspace(0, 1, 100)[:, None]
    seg = np.array([-20.0, -15, 10]) + t * np.array([40.0, 25, -20])
    scene = make_scene(seg)
    curve = correspond_and_triangulate(project_scene(scene), scene.cameras, k=200)
    C = curve.points - curve.points.mean(axis=0)
    sv = np.linalg.svd(C, compute_uv=False)
    assert sv[1] / np.sqrt(len(C)) < 1e-6


def test_match_views_reports_couplings_for_non_reference_views():
    scene, views = _exact_views("helix")
    res = match_views(views, scene.cameras, k=100)
    assert sorted(res.couplings) == [0, 2]
    assert len(res.curve.points) == 100
    assert np.array_equal(res.matched[1], resample_uniform(views[1].points, 100))

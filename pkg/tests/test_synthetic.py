import math

import numpy as np
import pytest

from filament3d.curve import CameraModel
from filament3d.errors import FrustumViolation, InvalidInput, TooLarge
from filament3d.frenet import frenet_series
from filament3d.synthetic import (
    bresenham,
    brute_force_frechet,
    brute_force_partition,
    count_couplings,
    curling_sequence,
    default_cameras,
    gen_pwc_curve,
    kendall_tau_order,
    make_scene,
    ordering_case,
    project_points,
    project_scene,
    rasterize_polyline,
    scene_curve,
)


def test_circle_closes():
    c = gen_pwc_curve([(0.5, 0.0)], [(0.0, 0.0)], 4 * np.pi, 400)
    assert np.linalg.norm(c.points[-1] - c.points[0]) < 1e-3
    # radius 2 about the point (0, 2, 0) in the start frame
    assert np.allclose(np.linalg.norm(c.points - [0, 2, 0], axis=1), 2.0, atol=1e-4)


def test_constant_rates_give_unit_helix():
    c = gen_pwc_curve([(0.5, 0.0)], [(0.5, 0.0)], 4 * np.pi, 2000)
    P = c.points
    # axis along T + B of the start frame, radius 1, pitch parameter 1
    axis = np.array([1.0, 0.0, 1.0]) / math.sqrt(2)
    center = np.array([0.0, 1.0, 0.0])
    rel = P - center
    radial = rel - np.outer(rel @ axis, axis)
    assert np.allclose(np.linalg.norm(radial, axis=1), 1.0, atol=1e-4)
    along = rel @ axis
    s = np.linspace(0, 4 * np.pi, 2000)
    assert np.allclose(along, s / math.sqrt(2), atol=1e-4)


def test_generator_first_frame_canonical():
    c = gen_pwc_curve([(0.3, 0.0)], [(0.1, 0.0)], 5.0, 500)
    assert np.array_equal(c.points[0], [0.0, 0.0, 0.0])
    t0 = (c.points[1] - c.points[0]) / np.linalg.norm(c.points[1] - c.points[0])
    assert np.allclose(t0, [1, 0, 0], atol=1e-2)


def test_integrator_converges_with_step():
    pieces = dict(kappa_segments=[(0.1, 0.02)], tau_segments=[(0.05, 0.01)], length=20.0, n=11)
    a = gen_pwc_curve(**pieces, step=0.1).points
    b = gen_pwc_curve(**pieces, step=0.05).points
    c = gen_pwc_curve(**pieces, step=0.025).points
    assert np.abs(a - b).max() < 4 * np.abs(b - c).max()
    assert np.abs(b - c).max() < np.abs(a - b).max()


def test_bad_breaks_rejected():
    with pytest.raises(InvalidInput):
        gen_pwc_curve([(0.1, 0.0), (0.2, 0.0)], [(0.0, 0.0)], 10.0, 50, kappa_breaks=[12.0])


def test_scene_deterministic():
    a = project_scene(make_scene(scene_curve("helix"), sigma=0.5, seed=3))
    b = project_scene(make_scene(scene_curve("helix"), sigma=0.5, seed=3))
    c = project_scene(make_scene(scene_curve("helix"), sigma=0.5, seed=4))
    assert all(np.array_equal(x.points, y.points) for x, y in zip(a, b))
    assert not np.array_equal(a[0].points, c[0].points)


def test_raster_deterministic():
    scene = make_scene(scene_curve("clothoid"), sigma=0.5, seed=3)
    _, ra = project_scene(scene, rasterize=True)
    _, rb = project_scene(scene, rasterize=True)
    assert all(x[0] == y[0] and x[1] == y[1] for x, y in zip(ra, rb))


def test_straight_segment_projects_collinear():
    seg = np.outer(np.linspace(-1, 1, 50), [20.0, 10.0, 5.0])
    for v in project_scene(make_scene(seg)):
        C = v.points - v.points.mean(axis=0)
        assert np.linalg.svd(C, compute_uv=False)[1] < 1e-8


def test_optical_axis_projects_to_principal_point():
    K = np.array([[1000.0, 0, 960], [0, 1000.0, 540], [0, 0, 1]])
    cam = CameraModel(K, np.hstack([np.eye(3), np.zeros((3, 1))]))
    assert np.allclose(project_points(np.array([[0.0, 0.0, 1000.0]]), cam), [[960.0, 540.0]])


def test_point_behind_camera_violates_frustum():
    K = np.array([[1000.0, 0, 960], [0, 1000.0, 540], [0, 0, 1]])
    cam = CameraModel(K, np.hstack([np.eye(3), np.zeros((3, 1))]))
    with pytest.raises(FrustumViolation):
        project_points(np.array([[0.0, 0.0, -5.0]]), cam)


def test_default_rig_geometry():
    cams = default_cameras()
    centers = np.array([c.center for c in cams])
    assert np.allclose(np.linalg.norm(centers, axis=1), 500.0)
    cosang = centers[0] @ centers[1] / 500.0**2
    assert math.degrees(math.acos(cosang)) == pytest.approx(60.0)
    assert np.array_equal(cams[1].H, np.eye(3))


def test_scene_fits_the_sensor():
    for kind in ("helix", "clothoid", "euler"):
        for v in project_scene(make_scene(scene_curve(kind))):
            assert v.points.min() > 0
            assert v.points[:, 0].max() < 1920 and v.points[:, 1].max() < 1080


def test_curling_sequence_tip_curvature_ramps():
    frames = curling_sequence(4, n=300)
    assert len(frames) == 4
    tips = [frenet_series(f.points).kappa[-5] for f in frames]
    assert np.all(np.diff(tips) > 0)
    assert all(np.array_equal(f.points[0], frames[0].points[0]) for f in frames)


def test_brute_force_partition_limit():
    with pytest.raises(TooLarge):
        brute_force_partition(np.arange(31.0), np.zeros(31), 1.0)


def test_brute_force_frechet_limit():
    with pytest.raises(TooLarge):
        brute_force_frechet(np.zeros((9, 2)), np.zeros((8, 2)))


def test_brute_force_partition_linear():
    s = np.arange(12.0)
    cost, starts = brute_force_partition(s, 3 * s - 2, 0.5)
    assert starts == (0,) and cost == pytest.approx(0.5, abs=1e-9)


def test_delannoy_counts():
    assert [count_couplings(n, n) for n in (1, 2, 3, 4)] == [1, 3, 13, 63]


def test_bresenham_is_8_connected():
    px = bresenham((0, 0), (7, 3))
    assert px[0] == (0, 0) and px[-1] == (7, 3)
    assert all(max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1 for a, b in zip(px, px[1:]))


def test_rasterized_path_is_thin():
    t = np.linspace(0, np.pi, 400)
    path = rasterize_polyline(np.column_stack([50 + 40 * np.cos(t), 50 + 40 * np.sin(t)]))
    steps = np.abs(np.diff(np.array(path), axis=0)).max(axis=1)
    assert np.all(steps == 1)
    for i in range(1, len(path) - 1):
        a, b = path[i - 1], path[i + 1]
        assert max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 2


def test_kendall_tau_extremes():
    order = [(i, 0) for i in range(10)]
    assert kendall_tau_order(np.array(order), order) == 1.0
    assert kendall_tau_order(np.array(order[::-1]), order) == -1.0


@pytest.mark.parametrize("kind", ["simple", "loop_at_tip", "loop_interior"])
def test_ordering_cases_are_reproducible(kind):
    a = ordering_case(kind, np.random.default_rng(5))
    b = ordering_case(kind, np.random.default_rng(5))
    assert a[0] == b[0] and a[1] == b[1]
    assert a[0].start_hint == tuple(a[1][0])

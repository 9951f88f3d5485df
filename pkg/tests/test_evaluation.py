import numpy as np
import pytest

from filament3d.correspondence import triangulate
from filament3d.errors import DegenerateMetric, ProjectionDegenerate
from filament3d.evaluation import (
    breakpoint_density,
    goodness,
    grid_search,
    reprojection_error,
    section_masks,
    tip_trajectory,
)
from filament3d.pwc import fit_pwc
from filament3d.reconstruction import reconstruct
from filament3d.synthetic import default_cameras, gen_pwc_curve, helix_points, make_scene, project_points, scene_curve


def test_perfect_fit():
    O = helix_points(1.0, 1.0, 100)
    m = goodness(O, O)
    assert m.r_squared == 1.0 and m.sse == 0.0
    assert m.per_section["entire"] == (0.0, 0.0)


def test_centroid_fit_has_zero_r_squared():
    O = helix_points(1.0, 1.0, 100)
    m = goodness(np.tile(O.mean(axis=0), (100, 1)), O)
    assert m.r_squared == pytest.approx(0.0, abs=1e-12)


def test_sse_matches_chi_square_expectation():
    rng = np.random.default_rng(12)
    O = helix_points(1.0, 1.0, 200)
    sigma = 0.05
    sse = [goodness(O + rng.normal(0, sigma, O.shape), O).sse for _ in range(100)]
    assert np.mean(sse) == pytest.approx(3 * 200 * sigma**2, rel=0.1)


def test_identical_observed_points_degenerate():
    with pytest.raises(DegenerateMetric):
        goodness(np.zeros((5, 3)), np.ones((5, 3)))


def test_section_masks_quarters():
    m = section_masks(np.linspace(0, 8, 9))
    assert m["base"].tolist() == [True, True, True] + [False] * 6
    assert m["tip"].tolist() == [False] * 6 + [True, True, True]
    assert m["entire"].all()


def test_section_r_squared_reported():
    O = helix_points(1.0, 1.0, 100)
    m = goodness(O + 0.01, O)
    assert set(m.section_r_squared) == {"base", "tip", "entire"}
    assert m.section_r_squared["entire"] == pytest.approx(m.r_squared)


def test_reprojection_of_exact_triangulation():
    scene = make_scene(scene_curve("helix", 200))
    views = [project_points(scene.truth_curve, c) for c in scene.cameras]
    curve = triangulate(views, scene.cameras)
    for v, cam in zip(views, scene.cameras):
        err = reprojection_error(curve, v, cam)
        assert err["entire"][0] < 1e-6


def test_reprojection_of_ten_pixel_offset():
    scene = make_scene(scene_curve("helix", 200))
    cam = scene.cameras[1]
    uv = project_points(scene.truth_curve, cam) + [6.0, 8.0]
    err = reprojection_error(scene.truth_curve, uv, cam)
    for name in ("base", "tip", "entire"):
        assert err[name][0] == pytest.approx(10.0, abs=1e-6)
        assert err[name][1] < 1e-6


def test_nearest_pairing_never_worse_than_arc_pairing():
    rng = np.random.default_rng(13)
    scene = make_scene(scene_curve("clothoid", 300))
    cam = scene.cameras[0]
    uv = project_points(scene.truth_curve, cam) + rng.normal(0, 2.0, (300, 2))
    arc = reprojection_error(scene.truth_curve, uv, cam, pairing="arc")
    near = reprojection_error(scene.truth_curve, uv, cam, pairing="nearest")
    assert near["entire"][0] <= arc["entire"][0]


def test_reprojection_behind_camera():
    cam = default_cameras()[1]
    behind = cam.center + 10 * (cam.center - np.zeros(3)) / np.linalg.norm(cam.center)
    with pytest.raises(ProjectionDegenerate):
        reprojection_error(np.vstack([np.zeros(3), behind]), np.zeros((2, 2)) + 500, cam)


def _short_clothoid():
    return gen_pwc_curve([(0.1, 0.02)], [(0.05, 0.01)], 20.0, 60)


def test_grid_search_point_range_single_evaluation():
    res = grid_search(_short_clothoid(), (5.0, 5.0), (5.0, 5.0), grid=10, max_iters=6)
    assert res.iterations == 1
    assert len(res.history[0].cells) == 1
    assert (res.best_eps_kappa, res.best_eps_tau) == (5.0, 5.0)


def test_grid_search_pure_noise_does_not_converge():
    rng = np.random.default_rng(14)
    noise = rng.normal(size=(60, 3))
    res = grid_search(noise, grid=3, max_iters=2)
    assert not res.converged
    assert np.isfinite(res.best.r_squared) and res.best.r_squared < 0.999


def test_grid_search_clothoid_converges():
    res = grid_search(_short_clothoid(), grid=4, max_iters=4)
    assert res.converged
    assert res.best.r_squared > 0.999 and res.best.sse_normalized < 1e-3
    assert res.iterations <= 4


def test_grid_search_deterministic_across_workers():
    c = _short_clothoid()
    a = grid_search(c, grid=3, max_iters=2, workers=1).to_dict()
    b = grid_search(c, grid=3, max_iters=2, workers=3).to_dict()
    assert a == b


def test_reconstruction_beats_a_straight_line():
    curve = scene_curve("clothoid", 200)
    model = fit_pwc(curve, 0.01, 0.01)
    r2 = goodness(reconstruct(model, curve).curve, curve).r_squared
    P = curve.points
    c = P.mean(axis=0)
    d = np.linalg.svd(P - c)[2][0]
    line = c + np.outer((P - c) @ d, d)
    assert r2 >= goodness(line, P).r_squared


def test_tip_trajectory_static():
    c = helix_points(1.0, 1.0, 50)
    tr = tip_trajectory([c] * 10)
    assert tr.points.shape == (10, 3)
    assert np.all(tr.points == c[-1])
    assert tr.xy.shape == tr.yz.shape == tr.xz.shape == (10, 2)


def test_tip_trajectory_single():
    assert tip_trajectory([helix_points(1.0, 1.0, 10)]).points.shape == (1, 3)


def test_breakpoints_of_single_segment_models():
    model = fit_pwc(gen_pwc_curve([(0.1, 0.02)], [(0.0, 0.0)], 20.0, 200), 0.01, 0.01)
    assert breakpoint_density([model]) == [{"kappa": [], "tau": []}]


def test_breakpoints_at_known_kinks():
    n, L = 201, 30.0
    curve = gen_pwc_curve([(0.1, 0.02), (0.5, -0.02), (-0.3, 0.02)], [(0.0, 0.0)], L, n, kappa_breaks=[10.0, 20.0])
    model = fit_pwc(curve, 0.05, 0.05)
    bp = breakpoint_density([model])[0]["kappa"]
    kinks = [round(10.0 / L * (n - 1)), round(20.0 / L * (n - 1))]
    assert len(bp) == 2
    assert all(abs(b - k) <= 1 for b, k in zip(bp, kinks))


def test_torsion_needs_more_segments_on_perturbed_helices():
    rng = np.random.default_rng(15)
    for _ in range(5):
        t = np.linspace(0, 4 * np.pi, 200)
        amp = rng.uniform(0.02, 0.06)
        freq = rng.integers(3, 7)
        pts = np.column_stack([np.cos(t), np.sin(t), t * 0.5 + amp * np.sin(freq * t)])
        m = fit_pwc(pts, 0.05, 0.05)
        assert len(m.tau_segments) >= len(m.kappa_segments)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from filament3d.errors import InvalidInput
from filament3d.frenet import discrete_frames, frenet_series
from filament3d.synthetic import helix_points

from conftest import random_rotation


def circle(r, n, turns=1.0):
    t = np.linspace(0, 2 * np.pi * turns, n, endpoint=False)
    return np.column_stack([r * np.cos(t), r * np.sin(t), np.zeros(n)])


def test_planar_circle_binormal():
    _, T, N, B, *_ = discrete_frames(circle(1.0, 200))
    assert np.allclose(np.abs(B[:, 2]), 1.0, atol=1e-6)
    assert np.allclose(B[:, :2], 0.0, atol=1e-6)
    assert len(np.unique(np.sign(B[:, 2]))) == 1


def test_helix_tangent_matches_analytic():
    n = 500
    t = np.linspace(0, 2 * np.pi, n)
    pts = helix_points(1.0, 1.0, n)
    _, T, *_ = discrete_frames(pts)
    exact = np.column_stack([-np.sin(t), np.cos(t), np.ones(n)]) / np.sqrt(2)
    ds = np.sqrt(2) * (t[1] - t[0])
    err = np.linalg.norm(T[1:-1] - exact[1:-1], axis=1)
    assert err.max() < ds


def test_straight_line_normals_propagated():
    pts = np.outer(np.arange(20.0), [1.0, 2.0, -1.0])
    fs = frenet_series(pts)
    assert fs.propagated[1:-1].all()
    assert np.all(fs.kappa == 0.0)
    for i in range(len(fs)):
        assert abs(fs.T[i].dot(fs.N[i])) < 1e-12


def test_circle_radius_two():
    fs = frenet_series(circle(2.0, 400))
    assert np.allclose(fs.kappa, 0.5, rtol=0.01)
    assert np.max(np.abs(fs.tau)) < 1e-3


def test_helix_kappa_tau_half():
    fs = frenet_series(helix_points(1.0, 1.0, 1000))
    assert np.allclose(fs.kappa, 0.5, rtol=0.01)
    assert np.allclose(fs.tau, 0.5, rtol=0.01)


def test_mirrored_helix_negates_torsion():
    pts = helix_points(1.0, 1.0, 300)
    a = frenet_series(pts)
    b = frenet_series(pts * [1.0, 1.0, -1.0])
    assert np.allclose(a.kappa, b.kappa, rtol=1e-12)
    assert np.allclose(a.tau, -b.tau, rtol=1e-9)


def test_boundary_samples_flagged():
    fs = frenet_series(helix_points(1.0, 1.0, 50))
    assert fs.extrapolated[0] and fs.extrapolated[-1]
    assert not fs.extrapolated[1:-1].any()
    assert fs.kappa[0] == fs.kappa[1] and fs.kappa[-1] == fs.kappa[-2]
    assert fs.first_defined() == 1


def test_duplicate_points_rejected():
    with pytest.raises(InvalidInput):
        frenet_series([[0, 0, 0], [1, 0, 0], [1, 0, 0], [2, 1, 0]])


def test_needs_three_points():
    with pytest.raises(InvalidInput):
        frenet_series([[0, 0, 0], [1, 0, 0]])


def test_curvature_converges_under_refinement():
    a, b = 2.0, 1.0

    def worst(n):
        t = np.linspace(0, np.pi, n)
        pts = np.column_stack([a * np.cos(t), b * np.sin(t), np.zeros(n)])
        exact = a * b / (a**2 * np.sin(t) ** 2 + b**2 * np.cos(t) ** 2) ** 1.5
        k = frenet_series(pts).kappa
        return np.max(np.abs(k[1:-1] - exact[1:-1]))

    errs = [worst(n) for n in (100, 200, 400, 800)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(ratios >= 1.5)


helix_params = st.tuples(st.floats(0.5, 5.0), st.floats(-3.0, 3.0), st.integers(30, 300), st.integers(0, 2**32 - 1))


@settings(max_examples=40, deadline=None)
@given(helix_params)
def test_frames_orthonormal_and_kappa_nonnegative(params):
    r, c, n, seed = params
    pts = helix_points(r, c, n, turns=1.5) + np.random.default_rng(seed).normal(0, 1e-3, (n, 3))
    fs = frenet_series(pts)
    for M in (fs.T, fs.N, fs.B):
        assert np.allclose(np.linalg.norm(M, axis=1), 1.0, atol=1e-9)
    assert np.max(np.abs(np.einsum("ij,ij->i", fs.T, fs.N))) < 1e-9
    assert np.max(np.abs(np.einsum("ij,ij->i", fs.T, fs.B))) < 1e-9
    assert np.max(np.abs(np.einsum("ij,ij->i", fs.N, fs.B))) < 1e-9
    assert np.allclose(fs.B, np.cross(fs.T, fs.N), atol=1e-9)
    assert np.all(fs.kappa >= 0)
    assert np.all(np.diff(fs.s) > 0)


@settings(max_examples=40, deadline=None)
@given(helix_params)
def test_rigid_motion_invariance(params):
    r, c, n, seed = params
    rng = np.random.default_rng(seed)
    pts = helix_points(r, c, n, turns=1.5)
    R = random_rotation(rng)
    if np.linalg.det(R) < 0:
        R = -R
    # torsion is a third difference, so coordinate rounding grows like |x| / ds^3;
    # a modest offset keeps that floor well below the tolerance
    moved = pts @ R.T + rng.uniform(-10, 10, 3)
    a, b = frenet_series(pts), frenet_series(moved)
    assert np.allclose(a.kappa, b.kappa, rtol=0, atol=1e-9)
    assert np.allclose(a.tau, b.tau, rtol=0, atol=1e-9)

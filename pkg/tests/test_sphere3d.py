import math

import numpy as np
import pytest

from conftest import REAL_K, random_intrinsics, random_sphere
from spherelocate.ellipse_fit import fit_ellipse_direct
from spherelocate.errors import DivergedBehindCamera, RankDeficient
from spherelocate.geometry import (CameraIntrinsics, EllipseGeom, Sphere, conic_to_geom,
                                   normalized_to_pixel_conic, project_sphere)
from spherelocate.sphere3d import (LMConfig, TangentPlane, ellipse_to_normalized_conic,
                                   estimate_sphere, lm_residuals, refine_lm, solve_linear,
                                   tangent_planes)


def pixel_ellipse(s, K):
    return conic_to_geom(normalized_to_pixel_conic(project_sphere(s), K))


def plane_distances(planes, x0):
    return np.array([pl.n @ (pl.p - np.asarray(x0)) for pl in planes])


def test_on_axis_planes_touch_sphere():
    s = Sphere((0.0, 0.0, 5.0), 1.0)
    planes = tangent_planes(project_sphere(s), 360)
    assert len(planes) == 360
    for pl in planes:
        assert np.all(pl.p == 0)
        assert abs(np.linalg.norm(pl.n) - 1) < 1e-12
    np.testing.assert_allclose(plane_distances(planes, s.center), 1.0, atol=1e-12)


def test_planes_tangent_for_random_spheres(rng):
    for _ in range(100):
        s = random_sphere(rng)
        planes = tangent_planes(project_sphere(s), 36)
        d = plane_distances(planes, s.center)
        assert np.max(np.abs(d - s.radius)) < 1e-9 * max(1.0, s.center[2])


def test_tangent_planes_sample_count():
    with pytest.raises(ValueError):
        tangent_planes(project_sphere(Sphere((0, 0, 5), 1)), 2)


def test_solve_linear_examples():
    s = Sphere((0.0, 0.0, 5.0), 1.0)
    x = solve_linear(tangent_planes(project_sphere(s), 3), 1.0)
    np.testing.assert_allclose(x, s.center, atol=1e-9)
    s = Sphere((1.2, -0.4, 7.0), 0.3)
    x = solve_linear(tangent_planes(project_sphere(s), 360), 0.3)
    np.testing.assert_allclose(x, s.center, atol=1e-9)


def test_solve_linear_rank_deficient():
    n = np.array([0.0, 0.0, -1.0])
    with pytest.raises(RankDeficient):
        solve_linear([TangentPlane(np.zeros(3), n)] * 5, 1.0)
    with pytest.raises(RankDeficient):
        solve_linear([TangentPlane(np.zeros(3), n)] * 2, 1.0)


def test_lm_jacobian_matches_central_differences(rng):
    worst = 0.0
    for _ in range(100):
        K = random_intrinsics(rng)
        s = random_sphere(rng)
        pts = pixel_ellipse(s, K).points(40) + rng.normal(scale=1.0, size=(40, 2))
        x = np.asarray(s.center) + rng.normal(scale=0.02, size=3) * s.center[2]
        if x[2] <= 1.5 * s.radius:
            continue
        _, J = lm_residuals(x, s.radius, pts, K)
        num = np.empty_like(J)
        h = 1e-6 * np.linalg.norm(x)
        for k in range(3):
            dx = np.zeros(3)
            dx[k] = h
            num[:, k] = (lm_residuals(x + dx, s.radius, pts, K, jacobian=False)
                         - lm_residuals(x - dx, s.radius, pts, K, jacobian=False)) / (2 * h)
        worst = max(worst, np.linalg.norm(J - num) / np.linalg.norm(num))
    assert worst < 1e-4


def test_refine_from_truth_stays_put():
    s = Sphere((0.5, -0.2, 9.0), 0.3)
    pts = pixel_ellipse(s, REAL_K).points(360)
    est = refine_lm(s.center, s.radius, pts, REAL_K)
    assert est.iterations <= 2
    np.testing.assert_allclose(est.center, s.center, atol=1e-9)


def test_refine_from_perturbed_start():
    s = Sphere((0.5, -0.2, 9.0), 0.3)
    pts = pixel_ellipse(s, REAL_K).points(360)
    est = refine_lm(np.add(s.center, (0.05, -0.05, 0.2)), s.radius, pts, REAL_K)
    np.testing.assert_allclose(est.center, s.center, atol=1e-6)
    assert all(b <= a for a, b in zip(est.costs, est.costs[1:]))


def test_refine_with_noise_improves_image_cost():
    s = Sphere((1.0, 0.5, 30.0), 0.3)
    e = pixel_ellipse(s, REAL_K)
    lin_err, ref_err = [], []
    for seed in range(100):
        pts = e.points(360) + np.random.default_rng(seed).normal(scale=0.5, size=(360, 2))
        fit = conic_to_geom(fit_ellipse_direct(pts))
        lin = estimate_sphere(fit, REAL_K, s.radius, pts, refine=False)
        ref = estimate_sphere(fit, REAL_K, s.radius, pts)
        assert ref.residual_rms <= lin.residual_rms + 1e-12
        assert all(b <= a for a, b in zip(ref.costs, ref.costs[1:]))
        lin_err.append(np.linalg.norm(lin.center - s.center))
        ref_err.append(np.linalg.norm(ref.center - s.center))
    assert np.median(ref_err) < 0.02 * s.center[2]


def test_refine_rejects_start_behind_camera():
    pts = pixel_ellipse(Sphere((0, 0, 5), 1), REAL_K).points(20)
    with pytest.raises(DivergedBehindCamera):
        refine_lm((0, 0, 0.5), 1.0, pts, REAL_K)
    with pytest.raises(ValueError):
        refine_lm((0, 0, 5), 1.0, pts[:5], REAL_K)


def test_max_iterations_flagged():
    s = Sphere((0.5, -0.2, 9.0), 0.3)
    pts = pixel_ellipse(s, REAL_K).points(360) + np.random.default_rng(1).normal(size=(360, 2))
    est = refine_lm(np.add(s.center, (0.5, -0.5, 2.0)), s.radius, pts, REAL_K,
                    LMConfig(max_iterations=1))
    assert est.iterations == 1 and not est.converged


def test_estimate_sphere_noiseless_chain(rng):
    for _ in range(50):
        K, s = random_intrinsics(rng), random_sphere(rng)
        est = estimate_sphere(pixel_ellipse(s, K), K, s.radius)
        assert np.linalg.norm(est.center - s.center) < 1e-6 * s.center[2]
        assert est.method == "refined" and est.center[2] > 0


def test_radius_scaling_scales_center():
    s = Sphere((0.3, 0.1, 4.0), 0.25)
    e = pixel_ellipse(s, REAL_K)
    c1 = estimate_sphere(e, REAL_K, 0.25, refine=False).center
    c2 = estimate_sphere(e, REAL_K, 0.5, refine=False).center
    np.testing.assert_allclose(c2, 2 * c1, rtol=1e-9)


def test_on_axis_closed_form():
    K = CameraIntrinsics(1000.0, 1000.0, 320.0, 240.0)
    R = 80.0
    rho = R / K.fu
    r = 0.3
    est = estimate_sphere(EllipseGeom(320.0, 240.0, R, R, 0.0), K, r)
    z = r * math.sqrt(1 + rho * rho) / rho
    np.testing.assert_allclose(est.center, [0, 0, z], atol=1e-9)
    # the small-angle distance estimate r f / R differs by the factor sqrt(1 + rho^2)
    assert abs(r * K.fu / R - z) / z < rho * rho


def test_plane_residuals_bounded_by_linear_residual(rng):
    s = Sphere((0.4, 0.2, 6.0), 0.3)
    pts = pixel_ellipse(s, REAL_K).points(360) + rng.normal(scale=0.5, size=(360, 2))
    planes = tangent_planes(ellipse_to_normalized_conic(conic_to_geom(fit_ellipse_direct(pts)),
                                                        REAL_K), 360)
    lin = solve_linear(planes, s.radius)
    res = np.abs(plane_distances(planes, lin) - s.radius)
    rms = math.sqrt(np.mean(res ** 2))
    assert res.max() <= 3 * rms

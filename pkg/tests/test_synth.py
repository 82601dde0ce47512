import math

import numpy as np
import pytest

from spherelocate.edges import sobel
from spherelocate.ellipse_fit import collect_radial_points, ellipse_distance
from spherelocate.errors import SilhouetteOutsideImage
from spherelocate.geometry import CameraIntrinsics, Sphere, normalize, project_sphere
from spherelocate.synth import (SyntheticScene, aggregate, evaluate, grid_scene, render_disk,
                                sample_contour, standard_grid)
from spherelocate.threshold import CircleHypothesis

K = CameraIntrinsics(600.0, 600.0, 160.0, 120.0)


def scene(center=(0.2, -0.1, 4.0), noise=0.0, seed=0):
    return SyntheticScene(K, Sphere(center, 0.3), 320, 240, noise_sigma=noise, seed=seed)


def test_contour_points_on_conic():
    sc = scene()
    pts = sample_contour(sc)
    c = project_sphere(sc.sphere)
    vals = c.evaluate(normalize(pts, K))
    assert np.max(np.abs(vals)) < 1e-9 * np.abs(c.coeffs).max()


def test_on_axis_contour_is_circle_around_principal_point():
    pts = sample_contour(scene(center=(0.0, 0.0, 4.0)))
    d = np.hypot(pts[:, 0] - K.u0, pts[:, 1] - K.v0)
    assert np.ptp(d) < 1e-9


def test_contour_noise_reproducible():
    a = sample_contour(scene(), sigma=0.5, seed=3)
    b = sample_contour(scene(), sigma=0.5, seed=3)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, sample_contour(scene(), sigma=0.5, seed=4))


def test_contour_outside_image():
    with pytest.raises(SilhouetteOutsideImage):
        sample_contour(scene(center=(5.0, 0.0, 4.0)))
    with pytest.raises(SilhouetteOutsideImage):
        render_disk(scene(center=(5.0, 0.0, 4.0)))


def test_render_levels_and_determinism():
    sc = scene()
    img = render_disk(sc)
    e = sc.ellipse
    assert img.dtype == np.uint8 and img.shape == (240, 320)
    assert img[int(round(e.cy)), int(round(e.cx))] == sc.fg
    assert img[0, 0] == sc.bg
    noisy = scene(noise=5.0, seed=9)
    assert render_disk(noisy).tobytes() == render_disk(noisy).tobytes()


def test_rendered_contour_matches_conic():
    sc = scene()
    e = sc.ellipse
    prof = collect_radial_points(sobel(render_disk(sc)), CircleHypothesis(e.cx, e.cy, 0.5 * (e.a + e.b)))
    d = ellipse_distance(e, prof.positions)
    assert len(prof) >= 0.9 * 360 and np.mean(d < 1.0) >= 0.9


def test_scene_validation_and_json(tmp_path):
    with pytest.raises(ValueError):
        SyntheticScene(K, Sphere((0, 0, 4), 0.3), 2, 240)
    with pytest.raises(ValueError):
        SyntheticScene(K, Sphere((0, 0, 4), 0.3), 320, 240, fg=300)
    with pytest.raises(ValueError):
        SyntheticScene.from_dict({"fu": 1})
    sc = scene(noise=2.0, seed=5)
    path = tmp_path / "s.json"
    sc.save(path)
    assert SyntheticScene.load(path) == sc
    assert set(sc.to_dict()) == {"fu", "fv", "u0", "v0", "us", "vs", "width", "height",
                                 "sphere", "fg", "bg", "noise_sigma", "seed"}


def test_standard_grid_layout():
    grid = standard_grid()
    assert len(grid) == 100
    depths = sorted({round(s.sphere.center[2] / s.sphere.radius, 6) for s in grid})
    assert depths == [2, 5, 10, 30, 100]
    offsets = sorted({round(math.degrees(math.atan2(math.hypot(*s.sphere.center[:2]),
                                                    s.sphere.center[2])), 6) for s in grid})
    assert offsets == [0, 10, 20, 30, 40]
    for s in grid:
        e = s.ellipse
        assert 55 * 0.98 <= e.a <= 80 * 1.02  # aspect jitter stretches one axis
        assert 0 <= e.cx < s.width and 0 <= e.cy < s.height
    assert [g.to_dict() for g in grid] == [g.to_dict() for g in standard_grid()]
    assert grid_scene(5, 10, 1, noise_sigma=5).noise_sigma == 5


def test_evaluate_and_aggregate():
    sc = scene()
    gt = np.array(sc.sphere.center)
    assert evaluate(sc, gt).euclidean_error == 0
    r = evaluate(sc, gt + (0, 0, 1))
    assert r.euclidean_error == pytest.approx(1.0)
    assert r.relative_error == pytest.approx(1.0 / gt[2])
    failed = evaluate(sc, error="no_edges")
    assert failed.est_center is None and failed.error == "no_edges"
    errs = np.linspace(0, 1, 99)
    reports = [evaluate(sc, gt + (0, 0, e)) for e in errs] + [failed]
    summary = aggregate(reports)
    assert summary["count"] == 100 and summary["failed"] == 1
    assert summary["error"]["median"] == pytest.approx(np.median(errs))
    assert summary["error"]["mean"] == pytest.approx(errs.mean())
    assert summary["error"]["max"] == pytest.approx(1.0)
    assert aggregate([failed])["error"]["median"] is None

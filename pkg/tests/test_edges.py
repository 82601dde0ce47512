import math

import numpy as np
import pytest

from spherelocate.errors import ImageTooSmall, NoEdges
from spherelocate.edges import (MIN_MAGNITUDE, GradientField, extract_strong_points, sobel,
                                strong_threshold)
from spherelocate.geometry import CameraIntrinsics, Sphere
from spherelocate.synth import SyntheticScene, render_disk


def disk_image(radius=100.0, size=260, center=(130.3, 129.6)):
    """Anti-aliased disk: a sphere seen on-axis by a camera centred on ``center``."""
    f = 1000.0
    z = 10.0
    # silhouette radius in normalized units is r / sqrt(z^2 - r^2)
    rho = radius / f
    r = z * rho / math.sqrt(1 + rho * rho)
    K = CameraIntrinsics(f, f, center[0], center[1])
    return render_disk(SyntheticScene(K, Sphere((0.0, 0.0, z), r), size, size))


def test_constant_image_has_no_gradient():
    g = sobel(np.full((20, 30), 77, np.uint8))
    assert not g.magnitude.any()
    with pytest.raises(NoEdges):
        extract_strong_points(g)


def test_vertical_step_edge():
    img = np.zeros((9, 10), np.uint8)
    img[:, 5:] = 255
    g = sobel(img)
    inner = g.magnitude[1:-1]
    assert np.all(inner[:, 4] == 1020) and np.all(inner[:, 5] == 1020)
    assert np.all(g.gy[1:-1, 4:6] == 0) and np.all(g.direction[1:-1, 4:6] == 0)
    # the one-pixel border is zero
    for border in (g.magnitude[0], g.magnitude[-1], g.magnitude[:, 0], g.magnitude[:, -1]):
        assert not border.any()


def test_rotation_rotates_directions(rng):
    img = rng.integers(0, 256, size=(15, 15)).astype(np.uint8)
    g = sobel(img)
    # rot90 is counter-clockwise on the array; in (u right, v down) image
    # coordinates a direction rotates by -90 degrees
    gr = sobel(np.rot90(img))
    mag = np.rot90(g.magnitude)
    np.testing.assert_allclose(gr.magnitude[1:-1, 1:-1], mag[1:-1, 1:-1])
    mask = mag[1:-1, 1:-1] > 0
    diff = (gr.direction[1:-1, 1:-1] - (np.rot90(g.direction)[1:-1, 1:-1] - np.pi / 2)) % np.pi
    diff = np.minimum(diff, np.pi - diff)
    assert np.all(diff[mask] < 1e-9)


def test_image_too_small():
    with pytest.raises(ImageTooSmall):
        sobel(np.zeros((2, 5), np.uint8))


def test_threshold_percentile_and_floor():
    mag = np.zeros((10, 10))
    assert strong_threshold(mag) == MIN_MAGNITUDE
    mag.flat[:100] = np.arange(1, 101) * 10.0
    assert strong_threshold(mag) == pytest.approx(np.percentile(np.arange(1, 101) * 10.0, 90))
    assert strong_threshold(np.full((4, 4), 5.0)) == MIN_MAGNITUDE


def test_window_keeps_the_stronger_point():
    mag = np.zeros((9, 9))
    mag[3, 3] = 100
    mag[4, 5] = 200
    z = np.zeros_like(mag)
    pts = extract_strong_points(GradientField(z, z, mag, z), tau=50)
    assert len(pts) == 1
    assert pts[0].u == 5 and pts[0].v == 4 and pts[0].magnitude == 200


def test_disk_points_on_contour_and_radial():
    c = np.array([130.3, 129.6])
    pts = extract_strong_points(sobel(disk_image(center=tuple(c))))
    d = pts.positions - c
    dist = np.hypot(d[:, 0], d[:, 1])
    assert np.all(np.abs(dist - 100.0) <= 1.5)
    radial = np.arctan2(d[:, 1], d[:, 0])
    gap = np.abs((pts.direction - radial + np.pi / 2) % np.pi - np.pi / 2)
    assert np.mean(gap < math.radians(15)) >= 0.95
    # sorted by (v, u) and at most one point per 3x3 tile
    order = np.lexsort((pts.positions[:, 0], pts.positions[:, 1]))
    assert np.array_equal(order, np.arange(len(pts)))
    tiles = {(int(u) // 3, int(v) // 3) for u, v in pts.positions}
    assert len(tiles) == len(pts)


def test_extraction_is_deterministic():
    img = disk_image()
    a = extract_strong_points(sobel(img))
    b = extract_strong_points(sobel(img.copy()))
    assert a.positions.tobytes() == b.positions.tobytes()
    assert a.direction.tobytes() == b.direction.tobytes()

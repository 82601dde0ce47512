import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from spherelocate.estimator import (EllipseFitter, SphereLocator, check_intrinsics,
                                    check_points, check_radius)
from spherelocate.geometry import CameraIntrinsics, EllipseGeom
from spherelocate.synth import grid_scene, render_disk


def test_validation_helpers():
    assert check_points([[0, 1], [2, 3]]).dtype == float
    with pytest.raises(ValueError):
        check_points([[0, 1, 2]])
    with pytest.raises(ValueError):
        check_points([[0, np.nan]])
    K = CameraIntrinsics(10, 20, 3, 4)
    assert check_intrinsics(K) is K
    assert check_intrinsics(K.to_dict()) == K
    assert check_intrinsics(K.K) == K
    with pytest.raises(ValueError):
        check_intrinsics(np.eye(2))
    with pytest.raises(ValueError):
        check_intrinsics([[1, 1, 0], [0, 1, 0], [0, 0, 1]])
    assert check_radius(2) == 2.0
    for bad in (0, -1, float("inf")):
        with pytest.raises(ValueError):
            check_radius(bad)


def test_ellipse_fitter():
    e = EllipseGeom(40, 30, 20, 10, 0.3)
    pts = e.points(50)
    outliers = np.array([[0.0, 0.0], [100.0, 100.0], [40.0, 30.0]])
    fitter = EllipseFitter(robust=True, seed=1).fit(np.vstack([pts, outliers]))
    assert abs(fitter.ellipse_.a - 20) < 1e-6 and abs(fitter.ellipse_.cx - 40) < 1e-6
    assert fitter.predict(pts).all() and not fitter.predict(outliers).any()
    assert fitter.transform(pts).max() < 1e-9
    plain = EllipseFitter().fit(pts)
    assert len(plain.inliers_) == 50
    with pytest.raises(NotFittedError):
        EllipseFitter().transform(pts)


def test_params_roundtrip():
    loc = SphereLocator(intrinsics={"fu": 1, "fv": 1, "u0": 0, "v0": 0}, radius=0.3, seed=4)
    assert loc.get_params()["seed"] == 4
    c = clone(loc).set_params(iterations=10)
    assert c.iterations == 10 and c.radius == 0.3


def test_sphere_locator():
    sc = grid_scene(10, 10, 0)
    img = render_disk(sc)
    loc = SphereLocator(sc.K, sc.sphere.radius, iterations=20_000).fit(img)
    gt = np.array(sc.sphere.center)
    assert np.linalg.norm(loc.center_ - gt) < 0.01 * gt[2]
    centers = loc.predict([img, img])
    assert centers.shape == (2, 3)
    np.testing.assert_array_equal(centers[0], loc.center_)
    assert loc.predict(img).shape == (1, 3)
    with pytest.raises(ValueError):
        SphereLocator(sc.K, 0.0).fit(img)
    with pytest.raises(ValueError):
        SphereLocator(None, 0.3).fit(img)

"""scikit-learn style wrappers around the fitting and localization pipeline.

Nothing here is learned from training data in the statistical sense; ``fit``
runs the geometric fit on its input and stores the result in trailing
underscore attributes, ``predict`` applies the fitted model.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from .circle_ransac import RansacConfig
from .edges import check_image
from .ellipse_fit import (INLIER_TOL, EllipseRansacConfig, fit_ellipse_direct,
                          ransac_ellipse, sampson_distance)
from .geometry import CameraIntrinsics, conic_to_geom
from .pipeline import locate


def check_points(X, min_points: int = 1) -> np.ndarray:
    """Finite float array of shape (n, 2)."""
    X = check_array(X, dtype=float, ensure_min_samples=min_points)
    if X.shape[1] != 2:
        raise ValueError(f"expected points of shape (n, 2), got {X.shape}")
    return X


def check_intrinsics(K) -> CameraIntrinsics:
    """Accept a :class:`CameraIntrinsics`, a mapping, or a 3x3 camera matrix."""
    if isinstance(K, CameraIntrinsics):
        return K
    if isinstance(K, dict):
        return CameraIntrinsics.from_dict(K)
    M = np.asarray(K, dtype=float)
    if M.shape != (3, 3):
        raise ValueError(f"camera matrix must be 3x3, got shape {M.shape}")
    if M[0, 1] != 0 or np.any(M[2] != (0.0, 0.0, 1.0)) or M[1, 0] != 0:
        raise ValueError("camera matrix must be [[fu,0,u0],[0,fv,v0],[0,0,1]]")
    return CameraIntrinsics(M[0, 0], M[1, 1], M[0, 2], M[1, 2])


def check_radius(r) -> float:
    r = float(r)
    if not np.isfinite(r) or r <= 0:
        raise ValueError(f"sphere radius must be positive, got {r}")
    return r


class EllipseFitter(BaseEstimator):
    """Ellipse through 2D points, optionally robust to outliers.

    Parameters
    ----------
    robust : bool
        Use five-point RANSAC before the final direct fit.
    inlier_tol : float
        Sampson distance (pixels) for RANSAC consensus.
    iterations, seed : int
        RANSAC budget and seed; ignored when ``robust`` is False.

    Attributes
    ----------
    conic_ : Conic
    ellipse_ : EllipseGeom
    inliers_ : ndarray of int
    """

    def __init__(self, robust=False, inlier_tol=INLIER_TOL, iterations=1000, seed=0):
        self.robust = robust
        self.inlier_tol = inlier_tol
        self.iterations = iterations
        self.seed = seed

    def fit(self, X, y=None):
        X = check_points(X, min_points=5)
        if self.robust:
            cand = ransac_ellipse(X, self.inlier_tol,
                                  EllipseRansacConfig(self.iterations, self.seed))
            self.conic_, self.inliers_ = cand.conic, cand.inliers
        else:
            self.conic_ = fit_ellipse_direct(X)
            self.inliers_ = np.arange(len(X))
        self.ellipse_ = conic_to_geom(self.conic_)
        return self

    def transform(self, X):
        """Sampson distance of each point to the fitted ellipse."""
        check_is_fitted(self, "conic_")
        return sampson_distance(self.conic_.coeffs, check_points(X))

    def predict(self, X):
        """True for points within ``inlier_tol`` of the fitted ellipse."""
        return self.transform(X) <= self.inlier_tol


class SphereLocator(BaseEstimator):
    """Sphere center from grayscale images of a sphere with known radius.

    Parameters
    ----------
    intrinsics : CameraIntrinsics, dict or 3x3 array
    radius : float
        Sphere radius in the unit the center should come out in.
    iterations : int
        Circle RANSAC budget.
    seed : int
    refine : bool
        Polish the linear estimate with Levenberg-Marquardt.

    Attributes
    ----------
    center_ : ndarray of shape (3,)
        Center found for the last image passed to ``fit``.
    ellipse_ : EllipseGeom
    detection_, estimate_ : pipeline results for that image.
    """

    def __init__(self, intrinsics=None, radius=1.0, iterations=1_000_000, seed=0, refine=True):
        self.intrinsics = intrinsics
        self.radius = radius
        self.iterations = iterations
        self.seed = seed
        self.refine = refine

    def _locate(self, img):
        if self.intrinsics is None:
            raise ValueError("intrinsics must be set")
        K = check_intrinsics(self.intrinsics)
        r = check_radius(self.radius)
        cfg = RansacConfig(iterations=int(self.iterations), seed=int(self.seed))
        return locate(check_image(img), K, r, cfg, refine=self.refine)

    def fit(self, X, y=None):
        """Run detection and estimation on a single image ``X``."""
        self.detection_, self.estimate_ = self._locate(X)
        self.ellipse_ = self.detection_.ellipse
        self.center_ = np.asarray(self.estimate_.center, dtype=float)
        return self

    def predict(self, X):
        """Centers of shape (n, 3), one per image in the sequence ``X``."""
        if isinstance(X, np.ndarray) and X.ndim == 2:
            X = [X]
        return np.array([self._locate(img)[1].center for img in X], dtype=float).reshape(-1, 3)

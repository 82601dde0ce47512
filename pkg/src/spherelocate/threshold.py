"""Adaptive inlier threshold for approximating a sphere's ellipse by a circle.

A circle of radius R fitted to the silhouette misses the true contour by at
most ``(a - b) / 2``. Writing the axis ratio as ``s = (R + t) / (R - t)``
gives the threshold ``t = (s - 1) R / (s + 1)``; ``s`` itself is predicted
from the viewing geometry: the angle ``alpha`` between the cone axis and the
image plane, and the cone half-angle ``beta = arcsin(r / d)`` where the
distance ``d = r f / R`` is estimated from the circle size.

All functions accept scalars or numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConeDegenerate, SphereTooClose, UndefinedAtPrincipalPoint
from .geometry import CameraIntrinsics, normalize

NOISE_SLACK_PX = 1.0
FALLBACK_FRACTION = 0.05


@dataclass(frozen=True)
class CircleHypothesis:
    u: float
    v: float
    R: float

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("circle radius must be positive")

    @property
    def center(self) -> np.ndarray:
        return np.array([self.u, self.v])


@dataclass(frozen=True)
class ThresholdContext:
    """Intermediate quantities of one threshold evaluation (all in radians/pixels)."""

    alpha: float
    beta: float
    theta: float
    d: float
    s: float
    t: float


def estimate_distance(R, r, f):
    """Sphere distance from its image radius: ``d = r f / R``."""
    return r * np.asarray(f, dtype=float) / R


def _angle_between(a, b):
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    return np.arctan2(cross, np.sum(a * b, axis=-1))


def compute_alpha(x, K: CameraIntrinsics):
    """Angle between the viewing ray through pixel ``x`` and the image plane.

    Measured at the image point X between the direction to the camera
    center and the direction to the principal point; pi/2 at the principal
    point itself.
    """
    n = normalize(x, K)
    zeros = np.zeros(n.shape[:-1])
    to_camera = np.stack([-n[..., 0], -n[..., 1], -np.ones_like(zeros)], axis=-1)
    to_principal = np.stack([-n[..., 0], -n[..., 1], zeros], axis=-1)
    at_pp = np.hypot(n[..., 0], n[..., 1]) == 0
    alpha = np.where(at_pp, 0.5 * np.pi, _angle_between(to_camera, to_principal))
    return alpha[()] if alpha.ndim == 0 else alpha


def compute_beta(r, d):
    """Cone half-angle ``arcsin(r / d)``; raises SphereTooClose if d <= r."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= r):
        raise SphereTooClose(f"estimated distance {d} does not exceed radius {r}")
    beta = np.arcsin(r / d)
    return beta[()] if beta.ndim == 0 else beta


def axis_ratio(alpha, beta):
    """Major/minor axis ratio of a circular cone cut by a plane.

    ``alpha`` is the angle between cone axis and plane, ``beta`` the cone
    half-angle. The plane section has eccentricity cos(alpha)/cos(beta), so

        a/b = cos(beta) / sqrt(sin(alpha + beta) sin(alpha - beta)).

    Raises ConeDegenerate unless alpha > beta.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any(alpha <= beta):
        raise ConeDegenerate("cone axis angle must exceed the half-angle")
    ratio = np.cos(beta) / np.sqrt(np.sin(alpha + beta) * np.sin(alpha - beta))
    ratio = np.where(alpha == 0.5 * np.pi, 1.0, np.maximum(ratio, 1.0))
    return ratio[()] if ratio.ndim == 0 else ratio


def axis_ratio_bisector(alpha, beta):
    """Closed form ``sin(a) cos^2(b) / (sin^2(a) cos^2(b) - cos^2(a) sin^2(b))``.

    Derived by treating the chord through the axis piercing point as the
    minor axis. It never underestimates :func:`axis_ratio` and coincides
    with it at alpha = pi/2; kept as a conservative alternative.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any(alpha <= beta):
        raise ConeDegenerate("cone axis angle must exceed the half-angle")
    sa, ca = np.sin(alpha), np.cos(alpha)
    sb, cb = np.sin(beta), np.cos(beta)
    ratio = sa * cb * cb / (sa * sa * cb * cb - ca * ca * sb * sb)
    return ratio[()] if ratio.ndim == 0 else ratio


def compute_theta(x, K: CameraIntrinsics):
    """Angle in [0, pi] between the image x-axis and the ellipse major axis.

    The major axis lies on the line through the principal point, so this is
    the angle of the direction principal point -> X.
    """
    n = normalize(x, K)
    rho = np.hypot(n[..., 0], n[..., 1])
    if np.any(rho == 0):
        raise UndefinedAtPrincipalPoint("major-axis direction undefined at the principal point")
    theta = np.arccos(np.clip(n[..., 0] / rho, -1.0, 1.0))
    return theta[()] if theta.ndim == 0 else theta


def scaled_ratio(a_over_b, theta, us=1.0, vs=1.0):
    """Axis ratio as seen on a grid of ``us : vs`` pixels."""
    c2, s2 = np.cos(theta) ** 2, np.sin(theta) ** 2
    return a_over_b * np.sqrt((us * us * c2 + vs * vs * s2) / (us * us * s2 + vs * vs * c2))


def threshold(s, R):
    """``t = (s - 1) R / (s + 1)``, the inverse of ``s = (R + t) / (R - t)``."""
    return (s - 1.0) * R / (s + 1.0)


def threshold_context(c: CircleHypothesis, K: CameraIntrinsics, r: float) -> ThresholdContext:
    """Evaluate the full geometric chain for one circle (no noise slack)."""
    d = float(estimate_distance(c.R, r, K.f))
    beta = float(compute_beta(r, d))
    alpha = float(compute_alpha(c.center, K))
    ratio = float(axis_ratio(alpha, beta))
    if alpha == 0.5 * math.pi:
        theta, s = 0.0, 1.0
    else:
        theta = float(compute_theta(c.center, K))
        s = float(scaled_ratio(ratio, theta, K.us, K.vs))
        # anisotropic pixels can swap which image axis is the longer one
        s = max(s, 1.0 / s)
    return ThresholdContext(alpha, beta, theta, d, s, float(threshold(s, c.R)))


def adaptive_threshold(c: CircleHypothesis, K: CameraIntrinsics, r: float,
                       slack: float = NOISE_SLACK_PX) -> float:
    """Inlier threshold in pixels for circle ``c``: geometric bound plus noise slack.

    Raises SphereTooClose / ConeDegenerate for circles that no sphere of
    radius ``r`` in front of the camera could produce.
    """
    return threshold_context(c, K, r).t + slack


def adaptive_threshold_batch(centers, R, K: CameraIntrinsics, r: float,
                             slack: float = NOISE_SLACK_PX) -> np.ndarray:
    """Vectorized :func:`adaptive_threshold` for many circle hypotheses.

    Hypotheses with ``alpha <= beta`` get the conservative fallback
    ``0.05 R`` instead of raising. Circles implying ``d <= r`` (camera inside
    the sphere) cannot be a silhouette at all; they get ``nan``, which no
    distance satisfies.
    """
    centers = np.asarray(centers, dtype=float)
    R = np.asarray(R, dtype=float)
    d = estimate_distance(R, r, K.f)
    sin_beta = np.where(d > r, r / np.where(d > 0, d, 1.0), 1.0)
    beta = np.arcsin(np.clip(sin_beta, 0.0, 1.0))
    n = normalize(centers, K)
    rho = np.hypot(n[..., 0], n[..., 1])
    alpha = np.arctan2(1.0, rho)
    valid = (d > r) & (alpha > beta)
    prod = np.where(valid, np.sin(alpha + beta) * np.sin(alpha - beta), 1.0)
    ratio = np.maximum(np.cos(beta) / np.sqrt(prod), 1.0)
    theta = np.arccos(np.clip(n[..., 0] / np.where(rho > 0, rho, 1.0), -1.0, 1.0))
    s = scaled_ratio(ratio, theta, K.us, K.vs)
    s = np.maximum(s, 1.0 / s)
    t = np.where(valid, threshold(s, R), FALLBACK_FRACTION * R)
    return np.where(d > r, t + slack, np.nan)

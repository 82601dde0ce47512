"""Sphere center from a detected ellipse and a known radius.

Every contour point and its tangent line span, together with the camera
center, a plane tangent to the sphere. The center is at distance r from all
of them, which is linear in the center; the linear estimate is then polished
by Levenberg-Marquardt on image-space (Sampson) residuals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergedBehindCamera, RankDeficient
from .geometry import (CameraIntrinsics, Conic, EllipseGeom, conic_to_geom, ellipse_points,
                       geom_to_conic, normalize, pixel_to_normalized_conic, sphere_conic_coeffs)

N_PLANES = 360
RANK_TOL = 1e-8
NORMAL_EQ_MAX_COND = 1e6


@dataclass(frozen=True)
class TangentPlane:
    p: np.ndarray
    n: np.ndarray


@dataclass(frozen=True)
class SphereEstimate:
    center: np.ndarray
    residual_rms: float
    method: str
    iterations: int = 0
    converged: bool = True
    costs: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {"center": [float(x) for x in self.center],
                "residual_rms": float(self.residual_rms), "method": self.method}


@dataclass(frozen=True)
class LMConfig:
    damping: float = 1e-3
    factor: float = 10.0
    max_iterations: int = 100
    rel_cost_tol: float = 1e-12
    step_tol: float = 1e-10


def tangent_planes(c: Conic, n_samples: int = N_PLANES) -> list[TangentPlane]:
    """Planes through the camera center tangent to the viewing cone of ``c``.

    ``c`` is in normalized image coordinates. Normals are unit length and
    point away from the cone interior.
    """
    if n_samples < 3:
        raise ValueError("need at least 3 samples")
    P, N = _plane_arrays(c, n_samples)
    return [TangentPlane(p, n) for p, n in zip(P, N)]


def _plane_arrays(c: Conic, n_samples: int):
    geom = conic_to_geom(c)
    phi = 2.0 * np.pi * np.arange(n_samples) / n_samples
    pts = ellipse_points(geom, phi)
    q = np.column_stack([pts, np.ones(n_samples)])
    lines = q @ c.matrix
    # the image tangent direction is (-l1, l0) on the z = 1 plane
    d = np.column_stack([-lines[:, 1], lines[:, 0], np.zeros(n_samples)])
    n = np.cross(q, d)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    inward = np.array([geom.cx, geom.cy, 1.0])
    n[n @ inward > 0] *= -1.0
    return np.zeros((n_samples, 3)), n


def solve_linear(planes, r: float) -> np.ndarray:
    """Least-squares center from ``n_i . x0 = n_i . p_i - r``.

    Raises RankDeficient when the normals do not span 3D.
    """
    if isinstance(planes, tuple):
        P, N = planes
    else:
        P = np.array([pl.p for pl in planes], dtype=float)
        N = np.array([pl.n for pl in planes], dtype=float)
    if len(N) < 3:
        raise RankDeficient(f"need at least 3 planes, got {len(N)}")
    b = np.einsum("ij,ij->i", N, P) - r
    sv = np.linalg.svd(N, compute_uv=False)
    if sv[-1] <= RANK_TOL * sv[0]:
        raise RankDeficient("tangent plane normals do not span 3D")
    if (sv[0] / sv[-1]) ** 2 <= NORMAL_EQ_MAX_COND:
        return np.linalg.solve(N.T @ N, N.T @ b)
    return np.linalg.lstsq(N, b, rcond=None)[0]


def _dconic(center):
    """d(A..F)/d(x0, y0, z0) as a (3, 6) array."""
    x0, y0, z0 = center
    return np.array([
        [0.0, 2 * y0, -2 * x0, 2 * z0, 0.0, -2 * x0],
        [-2 * y0, 2 * x0, 0.0, 0.0, 2 * z0, -2 * y0],
        [-2 * z0, 0.0, -2 * z0, 2 * x0, 2 * y0, 0.0],
    ])


def _conic_terms(coeffs, x, y):
    A, B, C, D, E, F = coeffs
    f = A * x * x + B * x * y + C * y * y + D * x + E * y + F
    fx = 2 * A * x + B * y + D
    fy = B * x + 2 * C * y + E
    return f, fx, fy


def lm_residuals(center, r: float, points, K: CameraIntrinsics, jacobian: bool = True):
    """Signed Sampson distances (pixels) of ``points`` to the sphere's silhouette.

    The algebraic residual is evaluated on normalized coordinates and its
    gradient is mapped to pixel units through the focal lengths. Returns
    ``(residuals, J)`` with ``J`` of shape ``(n, 3)``, or just the residuals.
    """
    center = np.asarray(center, dtype=float)
    q = normalize(points, K)
    x, y = q[:, 0], q[:, 1]
    f, fx, fy = _conic_terms(sphere_conic_coeffs(center, r), x, y)
    gu, gv = fx / K.fu, fy / K.fv
    h = np.hypot(gu, gv)
    e = f / h
    if not jacobian:
        return e
    J = np.empty((len(x), 3))
    for k, dc in enumerate(_dconic(center)):
        df, dfx, dfy = _conic_terms(dc, x, y)
        dh = (gu * dfx / K.fu + gv * dfy / K.fv) / h
        J[:, k] = (df * h - f * dh) / (h * h)
    return e, J


def refine_lm(initial, r: float, detected_points, K: CameraIntrinsics,
              cfg: LMConfig = LMConfig()) -> SphereEstimate:
    """Levenberg-Marquardt over the center, minimizing squared Sampson distances.

    Steps that would raise the cost or move the center behind ``z = r`` are
    rejected and the damping grows; accepted steps strictly lower the cost.
    ``converged`` is False when the iteration budget ran out; ``costs`` lists
    the cost after every accepted step, starting with the initial one.
    """
    x = np.asarray(initial, dtype=float).copy()
    if not x[2] > r:
        raise DivergedBehindCamera(f"initial depth {x[2]} must exceed radius {r}")
    pts = np.asarray(detected_points, dtype=float).reshape(-1, 2)
    if len(pts) < 6:
        raise ValueError(f"need at least 6 detected points, got {len(pts)}")
    lam = cfg.damping
    e, J = lm_residuals(x, r, pts, K)
    cost = float(e @ e)
    costs = [cost]
    converged = False
    it = 0
    while it < cfg.max_iterations:
        it += 1
        if cost == 0.0:
            converged = True
            break
        JtJ = J.T @ J
        g = J.T @ e
        accepted = False
        while lam < 1e16:
            A = JtJ + lam * np.diag(np.diag(JtJ))
            try:
                step = -np.linalg.solve(A, g)
            except np.linalg.LinAlgError:
                lam *= cfg.factor
                continue
            cand = x + step
            if cand[2] > r:
                e_new = lm_residuals(cand, r, pts, K, jacobian=False)
                new_cost = float(e_new @ e_new)
                if new_cost < cost:
                    accepted = True
                    break
            lam *= cfg.factor
        if not accepted:
            converged = True
            break
        rel = (cost - new_cost) / cost
        x = cand
        cost = new_cost
        costs.append(cost)
        lam /= cfg.factor
        e, J = lm_residuals(x, r, pts, K)
        if rel < cfg.rel_cost_tol or np.linalg.norm(step) < cfg.step_tol * (1.0 + np.linalg.norm(x)):
            converged = True
            break
    rms = math.sqrt(cost / len(pts))
    return SphereEstimate(x, rms, "refined", it, converged, tuple(costs))


def ellipse_to_normalized_conic(ellipse: EllipseGeom, K: CameraIntrinsics) -> Conic:
    return pixel_to_normalized_conic(geom_to_conic(ellipse), K).normalized()


def estimate_sphere(ellipse: EllipseGeom, K: CameraIntrinsics, r: float, detected_points=None,
                    n_samples: int = N_PLANES, refine: bool = True,
                    lm: LMConfig = LMConfig()) -> SphereEstimate:
    """Sphere center in camera coordinates from a pixel-space ellipse.

    Tangent planes give the linear estimate, which seeds the image-space
    refinement over ``detected_points`` (pixel coordinates; defaults to
    ``n_samples`` points of the ellipse itself).
    """
    conic = ellipse_to_normalized_conic(ellipse, K)
    center = solve_linear(_plane_arrays(conic, n_samples), r)
    if detected_points is None:
        detected_points = ellipse.points(n_samples)
    pts = np.asarray(detected_points, dtype=float).reshape(-1, 2)
    if not refine:
        e = lm_residuals(center, r, pts, K, jacobian=False)
        return SphereEstimate(center, math.sqrt(float(e @ e) / len(pts)), "linear")
    return refine_lm(center, r, pts, K, lm)

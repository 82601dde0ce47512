"""Pinhole camera and conic geometry.

Points are plain numpy arrays whose last axis has length 2, so every
function here works on a single point or a whole batch. Conics are kept in
normalized image coordinates; pixel-space conics only appear at the image
boundary and are converted with :func:`pixel_to_normalized_conic` /
:func:`normalized_to_pixel_conic`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSphere, NotAnEllipse, PointNotOnConic

ON_CONIC_RTOL = 1e-8


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics: focal lengths and principal point in pixels.

    ``us`` and ``vs`` are the relative pixel width and height; they only
    enter the circle-fit threshold model.
    """

    fu: float
    fv: float
    u0: float
    v0: float
    us: float = 1.0
    vs: float = 1.0

    def __post_init__(self):
        for name in ("fu", "fv", "u0", "v0", "us", "vs"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
            object.__setattr__(self, name, value)
        if self.fu <= 0 or self.fv <= 0:
            raise ValueError("focal lengths must be positive")
        if self.us <= 0 or self.vs <= 0:
            raise ValueError("pixel scale factors must be positive")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fu, 0.0, self.u0], [0.0, self.fv, self.v0], [0.0, 0.0, 1.0]])

    @property
    def f(self) -> float:
        """Single focal length used where only one is meaningful."""
        return 0.5 * (self.fu + self.fv)

    @property
    def principal_point(self) -> np.ndarray:
        return np.array([self.u0, self.v0])

    def to_dict(self) -> dict:
        return {"fu": self.fu, "fv": self.fv, "u0": self.u0, "v0": self.v0,
                "us": self.us, "vs": self.vs}

    @classmethod
    def from_dict(cls, data: dict) -> "CameraIntrinsics":
        try:
            return cls(data["fu"], data["fv"], data["u0"], data["v0"],
                       data.get("us", 1.0), data.get("vs", 1.0))
        except KeyError as exc:
            raise ValueError(f"intrinsics missing field {exc.args[0]!r}") from None


@dataclass(frozen=True)
class Sphere:
    center: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        c = tuple(float(x) for x in self.center)
        if len(c) != 3:
            raise ValueError("sphere center must be a 3-vector")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")


@dataclass(frozen=True)
class Conic:
    """Ax^2 + Bxy + Cy^2 + Dx + Ey + F = 0, defined up to a non-zero scale."""

    A: float
    B: float
    C: float
    D: float
    E: float
    F: float

    @classmethod
    def from_coeffs(cls, coeffs) -> "Conic":
        return cls(*(float(c) for c in coeffs))

    @classmethod
    def from_matrix(cls, T) -> "Conic":
        T = np.asarray(T, dtype=float)
        return cls(T[0, 0], T[0, 1] + T[1, 0], T[1, 1],
                   T[0, 2] + T[2, 0], T[1, 2] + T[2, 1], T[2, 2])

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([self.A, self.B, self.C, self.D, self.E, self.F])

    @property
    def matrix(self) -> np.ndarray:
        A, B, C, D, E, F = self.coeffs
        return np.array([[A, B / 2, D / 2], [B / 2, C, E / 2], [D / 2, E / 2, F]])

    @property
    def discriminant(self) -> float:
        """B^2 - 4AC; negative for ellipses."""
        return self.B * self.B - 4.0 * self.A * self.C

    def normalized(self) -> "Conic":
        """Canonical scale: unit coefficient norm, F >= 0 (A > 0 when F == 0)."""
        c = self.coeffs
        norm = np.linalg.norm(c)
        if norm == 0:
            raise ValueError("all-zero conic")
        c = c / norm
        if c[5] < 0 or (c[5] == 0 and c[0] < 0):
            c = -c
        return Conic.from_coeffs(c)

    def evaluate(self, points) -> np.ndarray:
        """Algebraic residual at each point."""
        p = np.asarray(points, dtype=float)
        x, y = p[..., 0], p[..., 1]
        return (self.A * x * x + self.B * x * y + self.C * y * y
                + self.D * x + self.E * y + self.F)


@dataclass(frozen=True)
class EllipseGeom:
    """Center, semi-axes (a >= b) and major-axis angle in [-pi/2, pi/2)."""

    cx: float
    cy: float
    a: float
    b: float
    angle: float

    def __post_init__(self):
        if not (self.a >= self.b > 0):
            raise ValueError(f"need a >= b > 0, got a={self.a}, b={self.b}")
        object.__setattr__(self, "angle", wrap_half_pi(self.angle))

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy])

    def to_dict(self) -> dict:
        return {"cx": self.cx, "cy": self.cy, "a": self.a, "b": self.b, "angle": self.angle}

    def points(self, n: int) -> np.ndarray:
        """``n`` points uniformly spaced in the parametric angle."""
        phi = 2.0 * np.pi * np.arange(n) / n
        return ellipse_points(self, phi)


def wrap_half_pi(angle: float) -> float:
    """Map an axis orientation (defined mod pi) into [-pi/2, pi/2)."""
    w = (float(angle) + 0.5 * math.pi) % math.pi - 0.5 * math.pi
    # float modulo can land exactly on the open end
    return -0.5 * math.pi if w >= 0.5 * math.pi else w


def ellipse_points(e: EllipseGeom, phi) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    ca, sa = math.cos(e.angle), math.sin(e.angle)
    x = e.a * np.cos(phi)
    y = e.b * np.sin(phi)
    return np.stack([e.cx + ca * x - sa * y, e.cy + sa * x + ca * y], axis=-1)


def normalize(p, K: CameraIntrinsics) -> np.ndarray:
    """Pixel -> normalized image coordinates."""
    p = np.asarray(p, dtype=float)
    return np.stack([(p[..., 0] - K.u0) / K.fu, (p[..., 1] - K.v0) / K.fv], axis=-1)


def denormalize(p, K: CameraIntrinsics) -> np.ndarray:
    """Normalized image -> pixel coordinates."""
    p = np.asarray(p, dtype=float)
    return np.stack([K.fu * p[..., 0] + K.u0, K.fv * p[..., 1] + K.v0], axis=-1)


def sphere_conic_coeffs(center, r):
    """Raw silhouette coefficients (A..F) for a sphere; broadcasts over centers."""
    x0, y0, z0 = (np.asarray(center, dtype=float)[..., i] for i in range(3))
    r2 = r * r
    return (r2 - y0 * y0 - z0 * z0, 2 * x0 * y0, r2 - x0 * x0 - z0 * z0,
            2 * x0 * z0, 2 * y0 * z0, r2 - x0 * x0 - y0 * y0)


def project_sphere(s: Sphere) -> Conic:
    """Silhouette of a sphere in normalized image coordinates.

    A ray z*(u, v, 1) touches the sphere when the quadratic in z has a
    double root; expanding that zero discriminant gives the coefficients
    below. The raw (unscaled) coefficients are returned.

    Raises
    ------
    DegenerateSphere
        If the sphere is not strictly in front of the camera (z0 <= r).
    """
    if not s.center[2] > s.radius:
        raise DegenerateSphere(f"sphere center depth {s.center[2]} must exceed radius {s.radius}")
    return Conic.from_coeffs(sphere_conic_coeffs(s.center, s.radius))


def tangency_discriminant(p, s: Sphere) -> np.ndarray:
    """Discriminant of the ray/sphere quadratic for rays through normalized ``p``."""
    p = np.asarray(p, dtype=float)
    u, v = p[..., 0], p[..., 1]
    x0, y0, z0 = s.center
    b = -2.0 * (u * x0 + v * y0 + z0)
    return b * b - 4.0 * (u * u + v * v + 1.0) * (x0 * x0 + y0 * y0 + z0 * z0 - s.radius ** 2)


def conic_to_geom(c: Conic) -> EllipseGeom:
    """Center, semi-axes and orientation of an ellipse conic.

    Raises
    ------
    NotAnEllipse
        For parabolas, hyperbolas, degenerate or imaginary ellipses.
    """
    T = c.matrix
    scale = np.abs(T).max()
    if scale == 0 or not np.isfinite(scale):
        raise NotAnEllipse("zero conic")
    T = T / scale
    M = T[:2, :2]
    if not (M[0, 1] ** 2 - M[0, 0] * M[1, 1]) < 0:
        raise NotAnEllipse("B^2 - 4AC >= 0")
    det = np.linalg.det(T)
    if det == 0:
        raise NotAnEllipse("singular conic matrix")
    center = np.linalg.solve(M, -T[:2, 2])
    f0 = T[2, 2] + T[:2, 2] @ center
    evals, evecs = np.linalg.eigh(M)
    axes2 = -f0 / evals
    if not np.all(axes2 > 0):
        raise NotAnEllipse("imaginary ellipse")
    axes = np.sqrt(axes2)
    major = int(np.argmax(axes))
    a, b = float(axes[major]), float(axes[1 - major])
    if abs(evals[0] - evals[1]) <= 1e-15 * abs(evals).max():
        angle = 0.0
    else:
        vx, vy = evecs[:, major]
        angle = math.atan2(vy, vx)
    return EllipseGeom(float(center[0]), float(center[1]), a, b, angle)


def geom_to_conic(e: EllipseGeom) -> Conic:
    ca, sa = math.cos(e.angle), math.sin(e.angle)
    a2, b2 = e.a * e.a, e.b * e.b
    A = a2 * sa * sa + b2 * ca * ca
    B = 2.0 * (b2 - a2) * sa * ca
    C = a2 * ca * ca + b2 * sa * sa
    D = -2.0 * A * e.cx - B * e.cy
    E = -B * e.cx - 2.0 * C * e.cy
    F = A * e.cx * e.cx + B * e.cx * e.cy + C * e.cy * e.cy - a2 * b2
    return Conic(A, B, C, D, E, F)


def tangent_line(c: Conic, p, rtol: float = ON_CONIC_RTOL) -> np.ndarray:
    """Homogeneous tangent line ``T @ [x, y, 1]`` at a point on the conic.

    Raises
    ------
    PointNotOnConic
        If |p^T T p| exceeds ``rtol * ||T|| * ||p||^2``.
    """
    T = c.matrix
    ph = np.array([p[0], p[1], 1.0], dtype=float)
    residual = ph @ T @ ph
    if abs(residual) > rtol * np.linalg.norm(T) * (ph @ ph):
        raise PointNotOnConic(f"point {tuple(p)} is off the conic (residual {residual:.3g})")
    return T @ ph


def substitute_affine(c: Conic, fu: float, fv: float, u0: float, v0: float) -> Conic:
    """Rewrite a conic given in ``x' = fu*x + u0, y' = fv*y + v0`` in terms of (x, y).

    Equivalent to ``N^T T N`` with ``N = [[fu, 0, u0], [0, fv, v0], [0, 0, 1]]``.
    """
    A, B, C, D, E, F = c.coeffs
    return Conic(
        A * fu * fu,
        B * fu * fv,
        C * fv * fv,
        2 * A * fu * u0 + B * fu * v0 + D * fu,
        B * fv * u0 + 2 * C * fv * v0 + E * fv,
        A * u0 * u0 + B * u0 * v0 + C * v0 * v0 + D * u0 + E * v0 + F,
    )


def unsubstitute_affine(c: Conic, fu: float, fv: float, u0: float, v0: float) -> Conic:
    """Inverse of :func:`substitute_affine`: back to the primed coordinates."""
    A, B, C, D, E, F = c.coeffs
    A1 = A / (fu * fu)
    B1 = B / (fu * fv)
    C1 = C / (fv * fv)
    D1 = (D - 2 * A1 * fu * u0 - B1 * fu * v0) / fu
    E1 = (E - 2 * C1 * fv * v0 - B1 * fv * u0) / fv
    F1 = F - A1 * u0 * u0 - B1 * u0 * v0 - C1 * v0 * v0 - D1 * u0 - E1 * v0
    return Conic(A1, B1, C1, D1, E1, F1)


def pixel_to_normalized_conic(c: Conic, K: CameraIntrinsics) -> Conic:
    return substitute_affine(c, K.fu, K.fv, K.u0, K.v0)


def normalized_to_pixel_conic(c: Conic, K: CameraIntrinsics) -> Conic:
    return unsubstitute_affine(c, K.fu, K.fv, K.u0, K.v0)

"""Ground-truth scenes: exact silhouette samples, rendered disks, error reports."""
from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import SilhouetteOutsideImage
from .geometry import (CameraIntrinsics, EllipseGeom, Sphere, conic_to_geom,
                       normalized_to_pixel_conic, normalize, project_sphere,
                       sphere_conic_coeffs)

SUPERSAMPLE = 4
GRID_DEPTHS = (2, 5, 10, 30, 100)
GRID_OFFSETS_DEG = (0, 10, 20, 30, 40)
GRID_SEEDS = (0, 1, 2, 3)


@dataclass(frozen=True)
class SyntheticScene:
    K: CameraIntrinsics
    sphere: Sphere
    width: int
    height: int
    fg: int = 200
    bg: int = 40
    noise_sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.width < 3 or self.height < 3:
            raise ValueError("image must be at least 3x3")
        for name in ("fg", "bg"):
            if not 0 <= getattr(self, name) <= 255:
                raise ValueError(f"{name} must be an 8-bit intensity")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    @property
    def ellipse(self) -> EllipseGeom:
        """Ground-truth silhouette in pixel coordinates."""
        return conic_to_geom(normalized_to_pixel_conic(project_sphere(self.sphere), self.K))

    def to_dict(self) -> dict:
        x, y, z = self.sphere.center
        d = {k: v for k, v in self.K.to_dict().items()}
        d.update(width=self.width, height=self.height,
                 sphere={"x": x, "y": y, "z": z, "r": self.sphere.radius},
                 fg=self.fg, bg=self.bg, noise_sigma=self.noise_sigma, seed=self.seed)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticScene":
        try:
            s = d["sphere"]
            return cls(CameraIntrinsics.from_dict(d),
                       Sphere((s["x"], s["y"], s["z"]), s["r"]),
                       int(d["width"]), int(d["height"]), int(d.get("fg", 200)),
                       int(d.get("bg", 40)), float(d.get("noise_sigma", 0.0)),
                       int(d.get("seed", 0)))
        except KeyError as exc:
            raise ValueError(f"scene config missing field {exc.args[0]!r}") from None

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "SyntheticScene":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _inside_image(pts, width, height):
    return (pts[:, 0] >= 0) & (pts[:, 0] <= width - 1) & (pts[:, 1] >= 0) & (pts[:, 1] <= height - 1)


def sample_contour(scene: SyntheticScene, n: int = 360, sigma: float = 0.0,
                   seed: int | None = None) -> np.ndarray:
    """``n`` silhouette points in pixels, optionally jittered by isotropic Gaussian noise."""
    pts = scene.ellipse.points(n)
    if not _inside_image(pts, scene.width, scene.height).any():
        raise SilhouetteOutsideImage("no silhouette point falls inside the image")
    if sigma > 0:
        rng = np.random.default_rng(scene.seed if seed is None else seed)
        pts = pts + rng.normal(scale=sigma, size=pts.shape)
    return pts


def render_disk(scene: SyntheticScene) -> np.ndarray:
    """Anti-aliased silhouette (4x4 supersampled) over a flat background.

    Pixel (row v, column u) covers [u - 0.5, u + 0.5] x [v - 0.5, v + 0.5].
    """
    e = scene.ellipse
    w, h = scene.width, scene.height
    if e.cx + e.a < -0.5 or e.cx - e.a > w - 0.5 or e.cy + e.a < -0.5 or e.cy - e.a > h - 0.5:
        raise SilhouetteOutsideImage("silhouette does not overlap the image")
    offs = (np.arange(SUPERSAMPLE) + 0.5) / SUPERSAMPLE - 0.5
    coeffs = sphere_conic_coeffs(scene.sphere.center, scene.sphere.radius)
    centre_sign = np.sign(_conic_value(coeffs, normalize(e.center, scene.K)))
    cover = np.zeros((h, w))
    us = np.arange(w, dtype=float)
    for dv in offs:
        v = np.arange(h, dtype=float)[:, None] + dv
        for du in offs:
            u = us[None, :] + du
            q = normalize(np.stack(np.broadcast_arrays(u, v), axis=-1), scene.K)
            cover += _conic_value(coeffs, q) * centre_sign > 0
    cover /= SUPERSAMPLE * SUPERSAMPLE
    img = scene.bg + (scene.fg - scene.bg) * cover
    if scene.noise_sigma > 0:
        rng = np.random.default_rng(scene.seed)
        img = img + rng.normal(scale=scene.noise_sigma, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def _conic_value(coeffs, q):
    A, B, C, D, E, F = coeffs
    x, y = q[..., 0], q[..., 1]
    return A * x * x + B * x * y + C * y * y + D * x + E * y + F


def grid_scene(depth_factor: float, offset_deg: float, seed: int, radius: float = 0.3,
               width: int = 320, height: int = 240, noise_sigma: float = 0.0,
               fg: int = 200, bg: int = 40) -> SyntheticScene:
    """One standard-grid scene.

    The sphere sits at depth ``depth_factor * radius`` and ``offset_deg``
    off the optical axis in a seeded direction. The focal length is chosen
    so the silhouette's semi-major axis is about 55-80 px (before a 2% pixel
    aspect jitter), and the principal point so the silhouette lands near the
    image center (the principal point itself may lie off-image).
    """
    rng = np.random.default_rng([int(depth_factor * 1000), int(offset_deg * 1000), seed])
    z = depth_factor * radius
    azimuth = rng.uniform(0.0, 2.0 * math.pi)
    lateral = z * math.tan(math.radians(offset_deg))
    sphere = Sphere((lateral * math.cos(azimuth), lateral * math.sin(azimuth), z), radius)
    unit = conic_to_geom(project_sphere(sphere))
    f = rng.uniform(55.0, 80.0) / unit.a
    aspect = rng.uniform(0.98, 1.02)
    fu, fv = f, f * aspect
    target = np.array([width / 2.0, height / 2.0]) + rng.uniform(-15.0, 15.0, size=2)
    u0 = target[0] - fu * unit.cx
    v0 = target[1] - fv * unit.cy
    K = CameraIntrinsics(fu, fv, u0, v0)
    return SyntheticScene(K, sphere, width, height, fg, bg, noise_sigma,
                          seed=int(rng.integers(0, 2**31)))


def standard_grid(noise_sigma: float = 0.0, radius: float = 0.3) -> list[SyntheticScene]:
    return [grid_scene(d, o, s, radius=radius, noise_sigma=noise_sigma)
            for d in GRID_DEPTHS for o in GRID_OFFSETS_DEG for s in GRID_SEEDS]


@dataclass
class EvalReport:
    gt_center: list
    est_center: list | None
    euclidean_error: float | None
    relative_error: float | None
    gt_ellipse: dict | None = None
    est_ellipse: dict | None = None
    timings: dict = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(scene: SyntheticScene, est_center=None, est_ellipse: EllipseGeom | None = None,
             timings: dict | None = None, error: str | None = None) -> EvalReport:
    """Compare an estimate with the scene's ground truth; ``error`` marks a failed run."""
    gt = np.asarray(scene.sphere.center, dtype=float)
    gt_ellipse = scene.ellipse.to_dict()
    if est_center is None:
        return EvalReport(gt.tolist(), None, None, None, gt_ellipse, None, dict(timings or {}),
                          error or "no estimate")
    est = np.asarray(est_center, dtype=float)
    err = float(np.linalg.norm(gt - est))
    return EvalReport(gt.tolist(), est.tolist(), err, err / float(gt[2]), gt_ellipse,
                      None if est_ellipse is None else est_ellipse.to_dict(),
                      dict(timings or {}), error)


def aggregate(reports) -> dict:
    """Median / mean / max of the successful runs' errors."""
    reports = list(reports)
    errs = np.array([r.euclidean_error for r in reports if r.euclidean_error is not None])
    rel = np.array([r.relative_error for r in reports if r.relative_error is not None])
    summary = {"count": len(reports), "succeeded": int(errs.size),
               "failed": len(reports) - int(errs.size)}
    for name, arr in (("error", errs), ("relative_error", rel)):
        if arr.size:
            summary[name] = {"median": float(np.median(arr)), "mean": float(arr.mean()),
                             "max": float(arr.max())}
        else:
            summary[name] = {"median": None, "mean": None, "max": None}
    return summary

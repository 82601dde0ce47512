"""End-to-end detection (edges -> circles -> ellipse) and sphere estimation."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .circle_ransac import RansacConfig, ScoredCircle, ransac_circles
from .edges import EdgePoints, GradientField, extract_strong_points, sobel
from .ellipse_fit import (INLIER_TOL, EllipseCandidate, EllipseRansacConfig,
                          collect_radial_points, largest_cluster, merge_candidates,
                          ransac_ellipse)
from .errors import DetectionError, NoConsensus
from .geometry import CameraIntrinsics, EllipseGeom
from .sphere3d import SphereEstimate, estimate_sphere

log = logging.getLogger(__name__)


@dataclass
class Detection:
    ellipse: EllipseGeom
    support: int
    points: np.ndarray
    candidates: list[EllipseCandidate]
    circles: list[ScoredCircle]
    edges: EdgePoints
    timings: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"ellipse": self.ellipse.to_dict(), "support": self.support}


def detect(img, K: CameraIntrinsics, r: float, circle_cfg: RansacConfig = RansacConfig(),
           ellipse_cfg: EllipseRansacConfig | None = None,
           inlier_tol: float = INLIER_TOL) -> Detection:
    """Find the sphere silhouette in a grayscale image.

    Raises a :class:`DetectionError` subclass when any stage comes up empty.
    """
    if ellipse_cfg is None:
        ellipse_cfg = EllipseRansacConfig(seed=circle_cfg.seed)
    timings = {}
    t0 = time.perf_counter()
    grad: GradientField = sobel(img)
    tau = grad.tau
    edges = extract_strong_points(grad, tau=tau)
    t1 = time.perf_counter()
    timings["edges"] = t1 - t0
    circles = ransac_circles(edges, K, r, circle_cfg, bounds=(grad.shape[1], grad.shape[0]))
    t2 = time.perf_counter()
    timings["circles"] = t2 - t1

    cands, point_sets = [], []
    for k, sc in enumerate(circles):
        try:
            profile = collect_radial_points(grad, sc.circle)
            cfg_k = EllipseRansacConfig(ellipse_cfg.iterations, ellipse_cfg.seed ^ k,
                                        ellipse_cfg.batch_size)
            cand = ransac_ellipse(profile.positions, inlier_tol, cfg_k)
        except DetectionError as exc:
            log.debug("circle %d rejected: %s", k, exc)
            continue
        cands.append(cand)
        point_sets.append(profile.positions[cand.inliers])
    if not cands:
        raise NoConsensus("no circle candidate produced an ellipse")
    ellipse = merge_candidates(cands)
    members = largest_cluster(cands)
    best = max(members, key=lambda i: (cands[i].support, -i))
    timings["ellipse"] = time.perf_counter() - t2
    log.info("detected %s (support %d) in %.3fs", ellipse, cands[best].support,
             sum(timings.values()))
    return Detection(ellipse, cands[best].support, point_sets[best], cands, circles, edges,
                     timings)


def locate(img, K: CameraIntrinsics, r: float, circle_cfg: RansacConfig = RansacConfig(),
           refine: bool = True) -> tuple[Detection, SphereEstimate]:
    """Detect the silhouette, then estimate the sphere center."""
    det = detect(img, K, r, circle_cfg)
    t0 = time.perf_counter()
    est = estimate_sphere(det.ellipse, K, r, det.points, refine=refine)
    det.timings["estimate"] = time.perf_counter() - t0
    return det, est

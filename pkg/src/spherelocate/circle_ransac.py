"""Three-point circle RANSAC over direction-annotated edge points.

Each hypothesis is scored with its own adaptive threshold: a point is an
inlier when its distance to the circle is within ``t`` and its gradient is
parallel (mod pi) to the radial direction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import distinct_indices, iteration_streams
from .edges import EdgePoints
from .errors import Collinear, NoCircleFound, TooFewPoints
from .geometry import CameraIntrinsics
from .threshold import CircleHypothesis, adaptive_threshold_batch

COLLINEAR_AREA = 1e-9
MIN_SCORE = 6


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 1_000_000
    seed: int = 0
    min_inlier_fraction: float = 0.02
    candidate_count: int = 5
    direction_tolerance: float = math.radians(22.5)
    early_exit_fraction: float = 0.6
    batch_size: int = 2048

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 < self.min_inlier_fraction < 1:
            raise ValueError("min_inlier_fraction must lie in (0, 1)")
        if self.candidate_count < 1:
            raise ValueError("candidate_count must be >= 1")


@dataclass(frozen=True)
class ScoredCircle:
    circle: CircleHypothesis
    inliers: np.ndarray = field(repr=False)
    threshold: float
    hypothesis: int

    @property
    def score(self) -> int:
        return int(self.inliers.size)


def circle_from_3_points(p1, p2, p3) -> CircleHypothesis:
    """Circumscribed circle of three points; raises Collinear for a flat triangle."""
    pts = np.array([p1, p2, p3], dtype=float)
    center, R, area = _circumcircles(pts[None, 0], pts[None, 1], pts[None, 2])
    if not area[0] > COLLINEAR_AREA:
        raise Collinear("points are collinear")
    return CircleHypothesis(float(center[0, 0]), float(center[0, 1]), float(R[0]))


def _circumcircles(a, b, c):
    bx, by = b[:, 0] - a[:, 0], b[:, 1] - a[:, 1]
    cx, cy = c[:, 0] - a[:, 0], c[:, 1] - a[:, 1]
    d = 2.0 * (bx * cy - by * cx)
    area = 0.25 * np.abs(d)
    safe = np.where(d == 0, 1.0, d)
    b2, c2 = bx * bx + by * by, cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / safe
    uy = (bx * c2 - cx * b2) / safe
    center = np.stack([a[:, 0] + ux, a[:, 1] + uy], axis=1)
    return center, np.hypot(ux, uy), area


def _unit_gradients(points: EdgePoints):
    return np.cos(points.direction), np.sin(points.direction)


def _inlier_mask(px, py, gu, gv, cx, cy, R, t, cos_tol):
    dx = px - cx
    dy = py - cy
    dist = np.hypot(dx, dy)
    radial = np.abs(dist - R) <= t
    aligned = np.abs(gu * dx + gv * dy) >= cos_tol * dist
    return radial & aligned


def circle_inliers(points: EdgePoints, circle: CircleHypothesis, t: float,
                   direction_tolerance: float = RansacConfig.direction_tolerance) -> np.ndarray:
    """Indices of points consistent with ``circle`` at threshold ``t``."""
    gu, gv = _unit_gradients(points)
    mask = _inlier_mask(points.positions[:, 0], points.positions[:, 1], gu, gv,
                        circle.u, circle.v, circle.R, t, math.cos(direction_tolerance))
    return np.flatnonzero(mask)


def _duplicates(c_ref, R_ref, centers, R):
    small = np.minimum(R_ref, R)
    return ((np.hypot(centers[:, 0] - c_ref[0], centers[:, 1] - c_ref[1]) < 0.5 * small)
            & (np.abs(R - R_ref) < 0.3 * small))


def ransac_circles(points: EdgePoints, K: CameraIntrinsics, r: float,
                   cfg: RansacConfig = RansacConfig(),
                   threshold_fn=adaptive_threshold_batch,
                   bounds: tuple[int, int] | None = None) -> list[ScoredCircle]:
    """Top ``cfg.candidate_count`` distinct circles, best first.

    Candidates are ranked by inlier count, then by larger radius, then by
    hypothesis index; near-duplicates of an already selected circle are
    suppressed. Hypotheses whose own three sample points violate the
    direction test are rejected before scoring.

    ``threshold_fn(centers, radii, K, r)`` supplies the per-hypothesis
    inlier threshold. Circles centred outside the image are rejected, since
    the radial search that follows needs the centre inside it;
    ``bounds=(width, height)`` gives the image size, and without it the
    bounding box of the points stands in for the image.
    """
    n = len(points)
    if n < 3:
        raise TooFewPoints(f"need at least 3 edge points, got {n}")
    px, py = points.positions[:, 0], points.positions[:, 1]
    gu, gv = _unit_gradients(points)
    cos_tol = math.cos(cfg.direction_tolerance)
    min_score = max(MIN_SCORE, cfg.min_inlier_fraction * n)
    early_exit = cfg.early_exit_fraction * n
    if bounds is None:
        lo, hi = points.positions.min(axis=0), points.positions.max(axis=0)
    else:
        lo, hi = np.zeros(2), np.array([bounds[0] - 1.0, bounds[1] - 1.0])

    all_scores, all_centers, all_R, all_t = [], [], [], []
    best = 0
    for start in range(0, cfg.iterations, cfg.batch_size):
        stop = min(start + cfg.batch_size, cfg.iterations)
        idx = distinct_indices(iteration_streams(cfg.seed, start, stop, 3), n)
        centers, R, area = _circumcircles(points.positions[idx[:, 0]],
                                          points.positions[idx[:, 1]],
                                          points.positions[idx[:, 2]])
        ok = area > COLLINEAR_AREA
        ok &= ((centers[:, 0] >= lo[0]) & (centers[:, 0] <= hi[0])
               & (centers[:, 1] >= lo[1]) & (centers[:, 1] <= hi[1]))
        t = np.zeros(stop - start)
        if ok.any():
            t[ok] = threshold_fn(centers[ok], R[ok], K, r)
        for j in range(3):
            k = idx[:, j]
            ok &= _inlier_mask(px[k], py[k], gu[k], gv[k], centers[:, 0], centers[:, 1],
                               R, np.inf, cos_tol)
        scores = np.zeros(stop - start, dtype=np.int64)
        sel = np.flatnonzero(ok)
        if sel.size:
            mask = _inlier_mask(px[None, :], py[None, :], gu[None, :], gv[None, :],
                                centers[sel, 0, None], centers[sel, 1, None],
                                R[sel, None], t[sel, None], cos_tol)
            scores[sel] = mask.sum(axis=1)
        all_scores.append(scores)
        all_centers.append(centers)
        all_R.append(R)
        all_t.append(t)
        best = max(best, int(scores.max()))
        if best > early_exit:
            break

    scores = np.concatenate(all_scores)
    if scores.max() < min_score:
        raise NoCircleFound(f"best circle has {int(scores.max())} inliers, need {min_score:g}")
    centers = np.concatenate(all_centers)
    R = np.concatenate(all_R)
    t = np.concatenate(all_t)

    pool = np.flatnonzero(scores >= min_score)
    pool = pool[np.lexsort((pool, -R[pool], -scores[pool]))]
    chosen = []
    while pool.size and len(chosen) < cfg.candidate_count:
        h = int(pool[0])
        chosen.append(h)
        pool = pool[~_duplicates(centers[h], R[h], centers[pool], R[pool])]

    out = []
    for h in chosen:
        circle = CircleHypothesis(float(centers[h, 0]), float(centers[h, 1]), float(R[h]))
        inliers = np.flatnonzero(_inlier_mask(px, py, gu, gv, centers[h, 0], centers[h, 1],
                                              R[h], t[h], cos_tol))
        out.append(ScoredCircle(circle, inliers, float(t[h]), h))
    return out

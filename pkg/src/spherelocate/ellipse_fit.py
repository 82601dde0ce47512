"""Ellipse refinement: radial edge collection, direct least-squares fitting,
RANSAC robustification and merging of per-circle candidates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from ._rng import distinct_indices, iteration_streams
from .edges import MIN_MAGNITUDE, GradientField
from .errors import (DegenerateInput, NoConsensus, NoEllipseSolution, NotAnEllipse,
                     TooFewPoints, TooFewProfilePoints)
from .geometry import Conic, EllipseGeom, conic_to_geom
from .threshold import CircleHypothesis

N_RAYS = 360
RADIAL_STEP = 0.25
MIN_PROFILE_RAYS = 8
INLIER_TOL = 2.0
MIN_SUPPORT = 8


@dataclass(frozen=True)
class RadialProfile:
    """Strongest edge location found on each ray around a circle hypothesis."""

    positions: np.ndarray
    magnitude: np.ndarray
    ray_angle: np.ndarray

    def __len__(self):
        return len(self.magnitude)


@dataclass(frozen=True)
class EllipseRansacConfig:
    iterations: int = 1000
    seed: int = 0
    batch_size: int = 500

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass(frozen=True)
class EllipseCandidate:
    conic: Conic
    geom: EllipseGeom
    support: int
    inliers: np.ndarray = field(repr=False, default=None)


def collect_radial_points(grad: GradientField, c: CircleHypothesis, tau: float | None = None,
                          n_rays: int = N_RAYS, step: float = RADIAL_STEP) -> RadialProfile:
    """Scan ``n_rays`` rays over ``[R - delta, R + delta]`` for the gradient maximum.

    ``delta = max(5, R / 4)`` pixels. Magnitudes are sampled bilinearly and
    the peak is refined by a parabola through its neighbours. Rays whose
    peak is below ``tau`` emit nothing. The default is the fixed floor of the
    edge-map threshold: a bilinearly sampled ray maximum sits below the
    pixel maxima that set the percentile part, so the full threshold would
    drop most genuine contour rays.
    """
    if tau is None:
        tau = MIN_MAGNITUDE
    h, w = grad.shape
    if not (0 <= c.u <= w - 1 and 0 <= c.v <= h - 1):
        raise TooFewProfilePoints("circle center lies outside the image")
    delta = max(5.0, 0.25 * c.R)
    # nothing beyond the farthest image corner can be sampled
    reach = math.hypot(max(c.u, w - 1 - c.u), max(c.v, h - 1 - c.v))
    r_lo, r_hi = max(c.R - delta, 0.0), min(c.R + delta, reach)
    if r_lo > r_hi:
        raise TooFewProfilePoints("circle lies entirely outside the image")
    radii = np.arange(r_lo, r_hi + 1e-9, step)
    phi = 2.0 * np.pi * np.arange(n_rays) / n_rays
    cu, cv = np.cos(phi)[:, None], np.sin(phi)[:, None]
    u = c.u + radii[None, :] * cu
    v = c.v + radii[None, :] * cv
    inside = (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)
    mag = map_coordinates(grad.magnitude, [v.ravel(), u.ravel()], order=1,
                          mode="constant", cval=0.0).reshape(u.shape)
    mag = np.where(inside, mag, 0.0)

    k = np.argmax(mag, axis=1)
    rows = np.arange(n_rays)
    peak = mag[rows, k]
    good = (peak >= tau) & inside[rows, k]
    # parabolic sub-sample refinement where both neighbours exist
    interior = (k > 0) & (k < radii.size - 1)
    km, kp = np.clip(k - 1, 0, None), np.clip(k + 1, None, radii.size - 1)
    m0, m1, m2 = mag[rows, km], peak, mag[rows, kp]
    denom = m0 - 2.0 * m1 + m2
    offset = np.where(interior & (denom < 0), 0.5 * (m0 - m2) / np.where(denom < 0, denom, -1.0), 0.0)
    rad = radii[k] + np.clip(offset, -0.5, 0.5) * step

    if good.sum() < MIN_PROFILE_RAYS:
        raise TooFewProfilePoints(f"only {int(good.sum())} rays found an edge")
    pos = np.stack([c.u + rad * np.cos(phi), c.v + rad * np.sin(phi)], axis=1)
    return RadialProfile(pos[good], peak[good], phi[good])


def _similarity_normalize(pts):
    """Centroid to origin, mean distance sqrt(2); returns points, scale, shift."""
    centroid = pts.mean(axis=-2, keepdims=True)
    centered = pts - centroid
    mean_dist = np.sqrt((centered ** 2).sum(axis=-1)).mean(axis=-1)
    scale = np.where(mean_dist > 0, math.sqrt(2.0) / np.where(mean_dist > 0, mean_dist, 1.0), 0.0)
    return centered * scale[..., None, None], scale, centroid[..., 0, :]


def fit_ellipse_batch(points) -> tuple[np.ndarray, np.ndarray]:
    """Direct ellipse fits for a stack of point sets, shape ``(m, k, 2)``.

    Returns ``(coeffs, valid)``: ``coeffs[i]`` are A..F in the input frame,
    ``valid[i]`` is False where the scatter was degenerate or no ellipse
    solution exists.
    """
    pts = np.asarray(points, dtype=float)
    m = pts.shape[0]
    q, scale, shift = _similarity_normalize(pts)
    x, y = q[..., 0], q[..., 1]
    ones = np.ones_like(x)
    D1 = np.stack([x * x, x * y, y * y], axis=-1)
    D2 = np.stack([x, y, ones], axis=-1)
    S1 = np.einsum("mki,mkj->mij", D1, D1)
    S2 = np.einsum("mki,mkj->mij", D1, D2)
    S3 = np.einsum("mki,mkj->mij", D2, D2)

    valid = scale > 0
    det3 = np.linalg.det(S3)
    valid &= np.abs(det3) > 1e-10
    S3 = np.where(valid[:, None, None], S3, np.eye(3))
    Tm = -np.linalg.solve(S3, np.swapaxes(S2, 1, 2))
    M = S1 + S2 @ Tm
    # premultiply by inv(C1) for the constraint 4AC - B^2 = 1
    M = np.stack([0.5 * M[:, 2], -M[:, 1], 0.5 * M[:, 0]], axis=1)
    evals, evecs = np.linalg.eig(M)
    evecs = evecs.real
    cond = 4.0 * evecs[:, 0, :] * evecs[:, 2, :] - evecs[:, 1, :] ** 2
    cond = np.where(np.abs(evals.imag) > 1e-9 * (1 + np.abs(evals.real)), -np.inf, cond)
    best = np.argmax(cond, axis=1)
    rows = np.arange(m)
    valid &= cond[rows, best] > 0
    a1 = evecs[rows, :, best]
    a1 = a1 / np.sqrt(np.where(valid, cond[rows, best], 1.0))[:, None]
    a2 = np.einsum("mij,mj->mi", Tm, a1)
    cn = np.concatenate([a1, a2], axis=1)

    # back to the input frame: x' = s*x - s*cx
    s = scale
    u0, v0 = -s * shift[:, 0], -s * shift[:, 1]
    A, B, C, D, E, F = cn.T
    coeffs = np.stack([
        A * s * s,
        B * s * s,
        C * s * s,
        2 * A * s * u0 + B * s * v0 + D * s,
        B * s * u0 + 2 * C * s * v0 + E * s,
        A * u0 * u0 + B * u0 * v0 + C * v0 * v0 + D * u0 + E * v0 + F,
    ], axis=1)
    valid &= np.all(np.isfinite(coeffs), axis=1)
    return coeffs, valid


def fit_ellipse_direct(points) -> Conic:
    """Algebraic least-squares ellipse through >= 5 points (constraint 4AC - B^2 = 1).

    Uses the Halir-Flusser block decomposition on similarity-normalized
    points and maps the result back to the input frame, so the fit commutes
    with translations and uniform scalings of the data.

    Raises
    ------
    DegenerateInput
        Fewer than 5 points, or coincident/collinear data.
    NoEllipseSolution
        No eigenvector of the reduced problem satisfies the ellipse constraint.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 5:
        raise DegenerateInput(f"need at least 5 points, got {len(pts)}")
    spread = pts - pts.mean(axis=0)
    sv = np.linalg.svd(spread, compute_uv=False)
    if sv[0] == 0 or sv[1] <= 1e-12 * sv[0]:
        raise DegenerateInput("points are coincident or collinear")
    coeffs, valid = fit_ellipse_batch(pts[None])
    if not valid[0]:
        raise NoEllipseSolution("no real ellipse solution for this point set")
    return Conic.from_coeffs(coeffs[0]).normalized()


def sampson_distance(coeffs, points) -> np.ndarray:
    """First-order geometric distance |f| / |grad f| of points to conic(s).

    ``coeffs`` has shape ``(6,)`` or ``(m, 6)``; the result broadcasts to
    ``(n,)`` or ``(m, n)``.
    """
    c = np.asarray(coeffs, dtype=float)
    p = np.asarray(points, dtype=float)
    x, y = p[:, 0], p[:, 1]
    if c.ndim == 2:
        A, B, C, D, E, F = (c[:, i, None] for i in range(6))
    else:
        A, B, C, D, E, F = c
    f = A * x * x + B * x * y + C * y * y + D * x + E * y + F
    gx = 2 * A * x + B * y + D
    gy = B * x + 2 * C * y + E
    g = np.hypot(gx, gy)
    return np.abs(f) / np.where(g > 0, g, np.finfo(float).tiny)


def ellipse_distance(e: EllipseGeom, points, iterations: int = 200) -> np.ndarray:
    """Exact Euclidean distance from points to an ellipse curve.

    Solves for the foot point in the ellipse frame by bisection on the
    Lagrange multiplier (robust for points inside and outside).
    """
    p = np.asarray(points, dtype=float).reshape(-1, 2) - e.center
    ca, sa = math.cos(e.angle), math.sin(e.angle)
    y0 = np.abs(ca * p[:, 0] + sa * p[:, 1])
    y1 = np.abs(-sa * p[:, 0] + ca * p[:, 1])
    a, b = e.a, e.b
    # roots of F(t) = (a y0/(t+a^2))^2 + (b y1/(t+b^2))^2 - 1 with t > -b^2
    lo = np.full_like(y0, -b * b)
    hi = -b * b + np.hypot(a * y0, b * y1)
    with np.errstate(divide="ignore", invalid="ignore"):
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            r0 = a * y0 / (mid + a * a)
            r1 = b * y1 / (mid + b * b)
            val = r0 * r0 + r1 * r1 - 1.0
            lo = np.where(val > 0, mid, lo)
            hi = np.where(val > 0, hi, mid)
    t = 0.5 * (lo + hi)
    x0 = a * a * y0 / (t + a * a)
    tb = t + b * b
    x1 = np.where(tb > 0, b * b * y1 / np.where(tb > 0, tb, 1.0), 0.0)
    # on the minor axis inside the ellipse the foot point is the co-vertex or an interior solution
    on_axis = (y1 == 0) & (a * y0 < a * a - b * b)
    foot0 = np.where(on_axis, a * a * y0 / (a * a - b * b), x0)
    foot1 = np.where(on_axis, b * np.sqrt(np.clip(1 - (foot0 / a) ** 2, 0, None)), x1)
    return np.hypot(y0 - foot0, y1 - foot1)


def _consensus(coeffs, pts, tol):
    return np.flatnonzero(sampson_distance(coeffs, pts) <= tol)


def ransac_ellipse(points, inlier_tol: float = INLIER_TOL,
                   cfg: EllipseRansacConfig = EllipseRansacConfig()) -> EllipseCandidate:
    """Five-point RANSAC around :func:`fit_ellipse_direct`.

    Inliers are points within ``inlier_tol`` Sampson distance. The winning
    consensus set is refit until it stops changing, so the returned inliers
    are exactly those within tolerance of the returned conic.
    """
    pts = np.asarray(getattr(points, "positions", points), dtype=float).reshape(-1, 2)
    n = len(pts)
    if n < 5:
        raise TooFewPoints(f"need at least 5 points, got {n}")
    best_score, best_coeffs = -1, None
    for start in range(0, cfg.iterations, cfg.batch_size):
        stop = min(start + cfg.batch_size, cfg.iterations)
        idx = distinct_indices(iteration_streams(cfg.seed, start, stop, 5), n)
        coeffs, valid = fit_ellipse_batch(pts[idx])
        if not valid.any():
            continue
        coeffs = coeffs[valid]
        scores = (sampson_distance(coeffs, pts) <= inlier_tol).sum(axis=1)
        j = int(np.argmax(scores))
        if scores[j] > best_score:
            best_score, best_coeffs = int(scores[j]), coeffs[j]
        if best_score == n:
            break
    if best_coeffs is None or best_score < MIN_SUPPORT:
        raise NoConsensus(f"best ellipse support {max(best_score, 0)} < {MIN_SUPPORT}")

    inliers = _consensus(best_coeffs, pts, inlier_tol)
    conic = None
    for _ in range(10):
        if inliers.size < 5:
            break
        try:
            candidate = fit_ellipse_direct(pts[inliers])
        except (DegenerateInput, NoEllipseSolution):
            break
        refit = _consensus(candidate.coeffs, pts, inlier_tol)
        if refit.size < inliers.size:
            break
        conic = candidate
        if np.array_equal(refit, inliers):
            break
        inliers = refit
    if conic is None:
        conic = Conic.from_coeffs(best_coeffs).normalized()
    inliers = _consensus(conic.coeffs, pts, inlier_tol)
    if inliers.size < MIN_SUPPORT:
        raise NoConsensus(f"ellipse support {inliers.size} < {MIN_SUPPORT}")
    try:
        geom = conic_to_geom(conic)
    except NotAnEllipse as exc:
        raise NoEllipseSolution(str(exc)) from None
    return EllipseCandidate(conic, geom, int(inliers.size), inliers)


def _angle_gap(t1, t2):
    d = abs(t1 - t2) % math.pi
    return min(d, math.pi - d)


def similar(e1: EllipseGeom, e2: EllipseGeom, center_frac: float = 0.1, axis_rel: float = 0.1,
            angle_tol: float = math.radians(10.0), round_ratio: float = 1.05) -> bool:
    scale = 0.5 * min(e1.a + e1.b, e2.a + e2.b)
    if math.hypot(e1.cx - e2.cx, e1.cy - e2.cy) >= center_frac * scale:
        return False
    if abs(e1.a - e2.a) >= axis_rel * max(e1.a, e2.a):
        return False
    if abs(e1.b - e2.b) >= axis_rel * max(e1.b, e2.b):
        return False
    if e1.a / e1.b < round_ratio or e2.a / e2.b < round_ratio:
        return True
    return _angle_gap(e1.angle, e2.angle) < angle_tol


def largest_cluster(cands) -> list[int]:
    """Indices of the biggest group of mutually :func:`similar` candidates.

    Groups are connected components of the similarity relation; ties go to
    the larger total support, then to the earlier candidate.
    """
    n = len(cands)
    label = list(range(n))

    def root(i):
        while label[i] != i:
            label[i] = label[label[i]]
            i = label[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if similar(cands[i].geom, cands[j].geom):
                label[root(j)] = root(i)
    clusters: dict[int, list[int]] = {}
    for i in range(n):
        clusters.setdefault(root(i), []).append(i)
    return max(clusters.values(),
               key=lambda m: (len(m), sum(cands[i].support for i in m), -min(m)))


def merge_candidates(cands) -> EllipseGeom:
    """Average the largest cluster of similar candidate ellipses.

    Centers and axes are averaged arithmetically, orientations as
    doubled-angle unit vectors so that angles near +-pi/2 do not cancel.
    """
    cands = list(cands)
    if not cands:
        raise ValueError("no candidates to merge")
    members = largest_cluster(cands)
    if len(members) == 1:
        return cands[members[0]].geom
    g = [cands[i].geom for i in members]
    cx = float(np.mean([e.cx for e in g]))
    cy = float(np.mean([e.cy for e in g]))
    a = float(np.mean([e.a for e in g]))
    b = float(np.mean([e.b for e in g]))
    s2 = sum(math.sin(2 * e.angle) for e in g)
    c2 = sum(math.cos(2 * e.angle) for e in g)
    angle = 0.5 * math.atan2(s2, c2)
    return EllipseGeom(cx, cy, max(a, b), min(a, b), angle)

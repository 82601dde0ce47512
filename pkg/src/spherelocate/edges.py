"""Sobel gradients and sparse strong edge points."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ImageTooSmall, NoEdges

MIN_MAGNITUDE = 40.0
PERCENTILE = 90.0
WINDOW = 3


class EdgePoint(NamedTuple):
    u: int
    v: int
    magnitude: float
    direction: float


@dataclass(frozen=True)
class GradientField:
    gx: np.ndarray
    gy: np.ndarray
    magnitude: np.ndarray
    direction: np.ndarray

    @property
    def shape(self):
        return self.magnitude.shape

    @property
    def tau(self) -> float:
        return strong_threshold(self.magnitude)


@dataclass(frozen=True)
class EdgePoints:
    """Struct-of-arrays edge point list: integer pixel positions (u, v),
    gradient magnitude and gradient direction in [-pi, pi)."""

    positions: np.ndarray
    magnitude: np.ndarray
    direction: np.ndarray

    def __len__(self):
        return len(self.magnitude)

    def __getitem__(self, i) -> EdgePoint:
        u, v = self.positions[i]
        return EdgePoint(int(u), int(v), float(self.magnitude[i]), float(self.direction[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def subset(self, idx) -> "EdgePoints":
        return EdgePoints(self.positions[idx], self.magnitude[idx], self.direction[idx])

    @classmethod
    def from_arrays(cls, positions, magnitude=None, direction=None) -> "EdgePoints":
        positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        n = len(positions)
        magnitude = np.ones(n) if magnitude is None else np.asarray(magnitude, dtype=float)
        direction = np.zeros(n) if direction is None else np.asarray(direction, dtype=float)
        return cls(positions, magnitude, direction)


def check_image(img) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale image, got shape {img.shape}")
    if img.shape[0] < 3 or img.shape[1] < 3:
        raise ImageTooSmall(f"image {img.shape[1]}x{img.shape[0]} is smaller than 3x3")
    return img


def sobel(img) -> GradientField:
    """3x3 Sobel gradients; the one-pixel border is left at zero."""
    f = check_image(img).astype(float)
    gx = np.zeros_like(f)
    gy = np.zeros_like(f)
    gx[1:-1, 1:-1] = ((f[:-2, 2:] + 2 * f[1:-1, 2:] + f[2:, 2:])
                      - (f[:-2, :-2] + 2 * f[1:-1, :-2] + f[2:, :-2]))
    gy[1:-1, 1:-1] = ((f[2:, :-2] + 2 * f[2:, 1:-1] + f[2:, 2:])
                      - (f[:-2, :-2] + 2 * f[:-2, 1:-1] + f[:-2, 2:]))
    magnitude = np.hypot(gx, gy)
    direction = np.arctan2(gy, gx)
    direction[direction >= np.pi] = -np.pi
    return GradientField(gx, gy, magnitude, direction)


def strong_threshold(magnitude: np.ndarray) -> float:
    """90th percentile of the non-zero magnitudes, never below 40."""
    nz = magnitude[magnitude > 0]
    if nz.size == 0:
        return MIN_MAGNITUDE
    return max(MIN_MAGNITUDE, float(np.percentile(nz, PERCENTILE)))


def extract_strong_points(grad: GradientField, window: int = WINDOW,
                          tau: float | None = None) -> EdgePoints:
    """Threshold the magnitude and keep the strongest pixel per ``window``-sized tile.

    Output is sorted by (v, u). Raises NoEdges when nothing survives.
    """
    if tau is None:
        tau = grad.tau
    mag = grad.magnitude
    v, u = np.nonzero(mag >= tau)
    if v.size == 0:
        raise NoEdges("no pixel exceeds the edge magnitude threshold")
    m = mag[v, u]
    ncols = -(-mag.shape[1] // window)
    cell = (v // window) * ncols + (u // window)
    # per cell: strongest first, ties resolved by raster order
    order = np.lexsort((u, v, -m, cell))
    cell_sorted = cell[order]
    first = np.ones(order.size, dtype=bool)
    first[1:] = cell_sorted[1:] != cell_sorted[:-1]
    keep = order[first]
    keep = keep[np.lexsort((u[keep], v[keep]))]
    vk, uk = v[keep], u[keep]
    return EdgePoints(np.stack([uk, vk], axis=1).astype(float), mag[vk, uk],
                      grad.direction[vk, uk])


def edge_points(img) -> tuple[GradientField, EdgePoints]:
    grad = sobel(img)
    return grad, extract_strong_points(grad)

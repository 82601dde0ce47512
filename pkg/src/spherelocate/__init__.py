"""Detect a sphere's elliptical silhouette in an image and recover its 3D center."""
from .circle_ransac import RansacConfig, ransac_circles
from .edges import edge_points, extract_strong_points, sobel
from .ellipse_fit import collect_radial_points, fit_ellipse_direct, ransac_ellipse
from .errors import SphereLocateError
from .estimator import EllipseFitter, SphereLocator
from .geometry import CameraIntrinsics, Conic, EllipseGeom, Sphere, project_sphere
from .imageio import read_image, write_pgm
from .pipeline import detect, locate
from .sphere3d import estimate_sphere, solve_linear, tangent_planes
from .synth import SyntheticScene, render_disk, standard_grid
from .threshold import CircleHypothesis, adaptive_threshold

__all__ = [
    "CameraIntrinsics", "CircleHypothesis", "Conic", "EllipseFitter", "EllipseGeom",
    "RansacConfig", "Sphere", "SphereLocateError", "SphereLocator", "SyntheticScene",
    "adaptive_threshold", "collect_radial_points", "detect", "edge_points", "estimate_sphere",
    "extract_strong_points", "fit_ellipse_direct", "locate", "project_sphere", "ransac_circles",
    "ransac_ellipse", "read_image", "render_disk", "sobel", "solve_linear", "standard_grid",
    "tangent_planes", "write_pgm",
]

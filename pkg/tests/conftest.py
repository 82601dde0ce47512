import math
import sys

import numpy as np
import pytest

from spherelocate.geometry import CameraIntrinsics, Sphere

# real-camera intrinsics used throughout the examples
REAL_K = CameraIntrinsics(4529.0, 4529.0, 659.0, 619.0)


def random_sphere(rng, r=None, depth=(2.0, 100.0), max_offset_deg=40.0):
    """Sphere at depth in ``depth * r`` and up to ``max_offset_deg`` off-axis."""
    r = rng.uniform(0.1, 2.0) if r is None else r
    z = rng.uniform(*depth) * r
    off = math.radians(rng.uniform(0.0, max_offset_deg))
    az = rng.uniform(0.0, 2.0 * math.pi)
    lat = z * math.tan(off)
    return Sphere((lat * math.cos(az), lat * math.sin(az), z), r)


def random_intrinsics(rng):
    f = rng.uniform(300.0, 5000.0)
    return CameraIntrinsics(f, f * rng.uniform(0.9, 1.1), rng.uniform(100, 900),
                            rng.uniform(100, 700))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)

import math
import sys

import numpy as np
import pytest

from armalign.armmodel import default_model
from armalign.geom import Rotation
from armalign.session import ArmRefs


def unit(rng, n=None):
    v = rng.normal(size=(3,) if n is None else (n, 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def random_rotation(rng):
    return Rotation.from_quat(rng.normal(size=4))


def random_refs(rng, model, min_sin=1e-3):
    """Reachable-or-not references with a clearly bent arm."""
    while True:
        u = unit(rng) * rng.uniform(0.15, 0.4)
        f = unit(rng) * rng.uniform(0.15, 0.4)
        if np.linalg.norm(np.cross(u, f)) > min_sin * np.linalg.norm(u) * np.linalg.norm(f):
            break
    e = model.x_s_h + u
    return ArmRefs(e, e + f, random_rotation(rng), float(rng.uniform()))


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def right():
    return default_model("right")


@pytest.fixture
def left():
    return default_model("left")


DEG = math.pi / 180.0


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])

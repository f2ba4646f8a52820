"""Rotation and projection primitives.

Quaternions are scalar-first ``(w, x, y, z)`` and always stored with ``w >= 0``.
Vectors are plain ``numpy`` arrays of shape ``(3,)``.
"""
from __future__ import annotations

import math
import sys
from typing import Iterable

import numpy as np

# ||x × y|| / (||x|| ||y||) below this counts as parallel
PARALLEL_EPS = 1e-9

E_X = np.array([1.0, 0.0, 0.0])
E_Y = np.array([0.0, 1.0, 0.0])
E_Z = np.array([0.0, 0.0, 1.0])


def vec3(v: Iterable[float]) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(3)
    x, y, z = a.tolist()
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
        raise ValueError(f"non-finite vector {a}")
    return a


def _xyz(v) -> tuple[float, float, float]:
    # python floats are much cheaper than numpy scalars for 3-element arithmetic
    return v.tolist() if isinstance(v, np.ndarray) else (float(v[0]), float(v[1]), float(v[2]))


def _norm(v) -> float:
    x, y, z = _xyz(v)
    return math.sqrt(x * x + y * y + z * z)


norm3 = _norm


def cross3(a, b) -> np.ndarray:
    """Cross product of two 3-vectors, without np.cross overhead."""
    a0, a1, a2 = _xyz(a)
    b0, b1, b2 = _xyz(b)
    return np.array([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0])


def _dot(a, b) -> float:
    a0, a1, a2 = _xyz(a)
    b0, b1, b2 = _xyz(b)
    return a0 * b0 + a1 * b1 + a2 * b2


def _canonical(w, x, y, z) -> tuple[float, float, float, float]:
    if w < 0.0 or (w == 0.0 and (x, y, z) < (0.0, 0.0, 0.0) and (x, y, z) != (0.0, 0.0, 0.0)):
        w, x, y, z = -w, -x, -y, -z
    # -0.0 would otherwise leak into serialized output
    return (w + 0.0, x + 0.0, y + 0.0, z + 0.0)


_UNIT_TOL = 8 * sys.float_info.epsilon


class Rotation:
    """Unit quaternion rotation with value semantics.

    ``a * b`` applies ``b`` first, then ``a``.
    """

    __slots__ = ("_q",)

    def __init__(self, w: float = 1.0, x: float = 0.0, y: float = 0.0, z: float = 0.0):
        w, x, y, z = float(w), float(x), float(y), float(z)
        n2 = w * w + x * x + y * y + z * z
        if not math.isfinite(n2) or n2 < 1e-24:
            raise ValueError(f"cannot build a rotation from quaternion {(w, x, y, z)}")
        # already unit to rounding: keep the components so serialisation round-trips exactly
        if abs(n2 - 1.0) > _UNIT_TOL:
            n = math.sqrt(n2)
            w, x, y, z = w / n, x / n, y / n, z / n
        self._q = _canonical(w, x, y, z)

    @classmethod
    def identity(cls) -> Rotation:
        return cls(1.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_quat(cls, q: Iterable[float]) -> Rotation:
        w, x, y, z = (float(c) for c in q)
        return cls(w, x, y, z)

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> Rotation:
        axis = np.asarray(axis, dtype=float)
        n = _norm(axis)
        if n == 0.0:
            raise ValueError("zero-length rotation axis")
        s = math.sin(0.5 * angle) / n
        return cls(math.cos(0.5 * angle), axis[0] * s, axis[1] * s, axis[2] * s)

    @classmethod
    def from_matrix(cls, m) -> Rotation:
        m = np.asarray(m, dtype=float)
        tr = m[0, 0] + m[1, 1] + m[2, 2]
        if tr > 0.0:
            s = 0.5 / math.sqrt(tr + 1.0)
            return cls(0.25 / s, (m[2, 1] - m[1, 2]) * s, (m[0, 2] - m[2, 0]) * s, (m[1, 0] - m[0, 1]) * s)
        if m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
            s = 2.0 * math.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2])
            return cls((m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s)
        if m[1, 1] > m[2, 2]:
            s = 2.0 * math.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2])
            return cls((m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s)
        s = 2.0 * math.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1])
        return cls((m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s)

    @property
    def q(self) -> tuple[float, float, float, float]:
        return self._q

    @property
    def angle(self) -> float:
        """Rotation angle in [0, pi]."""
        w, x, y, z = self._q
        return 2.0 * math.atan2(math.sqrt(x * x + y * y + z * z), w)

    @property
    def axis(self) -> np.ndarray:
        """Unit rotation axis; ``e_x`` for the identity."""
        _, x, y, z = self._q
        n = math.sqrt(x * x + y * y + z * z)
        if n == 0.0:
            return E_X.copy()
        return np.array([x / n, y / n, z / n])

    def inverse(self) -> Rotation:
        w, x, y, z = self._q
        return Rotation(w, -x, -y, -z)

    def __mul__(self, other: Rotation) -> Rotation:
        if not isinstance(other, Rotation):
            return NotImplemented
        w1, x1, y1, z1 = self._q
        w2, x2, y2, z2 = other._q
        return Rotation(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def apply(self, v) -> np.ndarray:
        """Rotate a vector, or each row of an ``(N, 3)`` array."""
        w, x, y, z = self._q
        v = np.asarray(v, dtype=float)
        if v.ndim == 2:
            return v @ self.as_matrix().T
        v0, v1, v2 = v.tolist()
        # v' = v + 2w (u × v) + 2 u × (u × v)
        tx = 2.0 * (y * v2 - z * v1)
        ty = 2.0 * (z * v0 - x * v2)
        tz = 2.0 * (x * v1 - y * v0)
        return np.array([
            v0 + w * tx + (y * tz - z * ty),
            v1 + w * ty + (z * tx - x * tz),
            v2 + w * tz + (x * ty - y * tx),
        ])

    def as_matrix(self) -> np.ndarray:
        w, x, y, z = self._q
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])

    def distance(self, other: Rotation) -> float:
        """Angle of the relative rotation between ``self`` and ``other``."""
        w, x, y, z = (self.inverse() * other)._q
        return 2.0 * math.atan2(math.sqrt(x * x + y * y + z * z), abs(w))

    def allclose(self, other: Rotation, atol: float = 1e-12) -> bool:
        return self.distance(other) <= atol

    def __eq__(self, other) -> bool:
        return isinstance(other, Rotation) and self._q == other._q

    def __hash__(self) -> int:
        return hash(self._q)

    def __repr__(self) -> str:
        return "Rotation(w=%r, x=%r, y=%r, z=%r)" % self._q


def _perpendicular_axis(x: np.ndarray) -> np.ndarray:
    c = cross3(x, E_Z)
    if _norm(c) < 1e-8:
        c = cross3(x, E_X)
    return c / _norm(c)


def rot_from_to(x, y) -> Rotation:
    """Shortest rotation taking direction ``x`` onto direction ``y``.

    The rotation axis is ``x × y``. Antiparallel inputs get a half turn about
    ``x × e_z`` (or ``x × e_x`` when ``x`` is vertical).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    nx, ny = _norm(x), _norm(y)
    if nx == 0.0 or ny == 0.0:
        raise ValueError("rot_from_to needs nonzero vectors")
    c = cross3(x, y)
    nc = _norm(c)
    if nc < PARALLEL_EPS * nx * ny:
        if _dot(x, y) > 0.0:
            return Rotation.identity()
        return Rotation.from_axis_angle(_perpendicular_axis(x / nx), math.pi)
    half = 0.5 * math.atan2(nc, _dot(x, y))
    s = math.sin(half) / nc
    return Rotation(math.cos(half), c[0] * s, c[1] * s, c[2] * s)


def twist_from_to(x, y, axis) -> Rotation:
    """Rotation about ``axis`` bringing the projection of ``x`` onto that of ``y``.

    Both projections are taken onto the plane normal to ``axis``. Identity
    when either projection vanishes.
    """
    k0, k1, k2 = _xyz(axis)
    n = math.sqrt(k0 * k0 + k1 * k1 + k2 * k2)
    if n == 0.0:
        raise ValueError("zero-length twist axis")
    k0, k1, k2 = k0 / n, k1 / n, k2 / n
    x0, x1, x2 = _xyz(x)
    y0, y1, y2 = _xyz(y)
    dx = x0 * k0 + x1 * k1 + x2 * k2
    dy = y0 * k0 + y1 * k1 + y2 * k2
    x0, x1, x2 = x0 - dx * k0, x1 - dx * k1, x2 - dx * k2
    y0, y1, y2 = y0 - dy * k0, y1 - dy * k1, y2 - dy * k2
    if math.sqrt(x0 * x0 + x1 * x1 + x2 * x2) < 1e-15 or math.sqrt(y0 * y0 + y1 * y1 + y2 * y2) < 1e-15:
        return Rotation.identity()
    sin = (x1 * y2 - x2 * y1) * k0 + (x2 * y0 - x0 * y2) * k1 + (x0 * y1 - x1 * y0) * k2
    half = 0.5 * math.atan2(sin, x0 * y0 + x1 * y1 + x2 * y2)
    sh = math.sin(half)
    return Rotation(math.cos(half), k0 * sh, k1 * sh, k2 * sh)


def project_perp(x, y) -> np.ndarray:
    """Component of ``x`` in the plane normal to ``y``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    yy = _dot(y, y)
    if yy == 0.0:
        raise ValueError("project_perp needs a nonzero normal")
    return x - (_dot(x, y) / yy) * y


def swing_twist(r: Rotation, axis) -> tuple[Rotation, Rotation]:
    """Split ``r`` into ``swing * twist`` with the twist about ``axis``."""
    axis = np.asarray(axis, dtype=float)
    n = _norm(axis)
    if n == 0.0:
        raise ValueError("zero-length twist axis")
    k = axis / n
    w, x, y, z = r.q
    p = x * k[0] + y * k[1] + z * k[2]
    if w * w + p * p < 1e-24:
        # half-turn swing: twist is undefined, pick identity
        return r, Rotation.identity()
    twist = Rotation(w, p * k[0], p * k[1], p * k[2])
    return r * twist.inverse(), twist


def signed_twist_angle(twist: Rotation, axis) -> float:
    """Signed angle in (-pi, pi] of a rotation about ``axis``."""
    w, x, y, z = twist.q
    p = _dot((x, y, z), axis) / _norm(axis)
    return 2.0 * math.atan2(p, w)


def rotation_pow(r: Rotation, alpha: float) -> Rotation:
    """Same axis, angle scaled by ``alpha`` (shortest-arc branch)."""
    theta = r.angle
    if theta == 0.0:
        return Rotation.identity()
    return Rotation.from_axis_angle(r.axis, alpha * theta)


def slerp(a: Rotation, b: Rotation, t: float) -> Rotation:
    return a * rotation_pow(a.inverse() * b, t)


def angle_between(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if _norm(x) == 0.0 or _norm(y) == 0.0:
        raise ValueError("angle_between needs nonzero vectors")
    return math.atan2(_norm(cross3(x, y)), _dot(x, y))


def exp_map(v) -> Rotation:
    """Rotation vector (axis times angle) to rotation."""
    v = np.asarray(v, dtype=float)
    theta = _norm(v)
    if theta < 1e-8:
        # sin(t/2)/t to second order
        s = 0.5 - theta * theta / 48.0
        return Rotation(math.cos(0.5 * theta), v[0] * s, v[1] * s, v[2] * s)
    s = math.sin(0.5 * theta) / theta
    return Rotation(math.cos(0.5 * theta), v[0] * s, v[1] * s, v[2] * s)


def log_map(r: Rotation) -> np.ndarray:
    w, x, y, z = r.q
    n = math.sqrt(x * x + y * y + z * z)
    if n < 1e-12:
        return np.array([2.0 * x, 2.0 * y, 2.0 * z])
    theta = 2.0 * math.atan2(n, w)
    return np.array([x, y, z]) * (theta / n)


def left_jacobian(v) -> np.ndarray:
    """SO(3) left Jacobian: d/dv exp(v) p = -[exp(v) p]x J_l(v)."""
    v = np.asarray(v, dtype=float)
    theta = _norm(v)
    k = skew(v)
    if theta < 1e-6:
        return np.eye(3) + 0.5 * k + k @ k / 6.0
    t2 = theta * theta
    return (np.eye(3) + (1.0 - math.cos(theta)) / t2 * k
            + (theta - math.sin(theta)) / (t2 * theta) * (k @ k))


def skew(v) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])

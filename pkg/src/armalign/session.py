"""Session frames, the session log format, pose catalog and therapy trajectory.

Log format (UTF-8, newline-delimited)::

    AVTR 1 <rate_hz>
    t  base(px py pz qw qx qy qz)  cam(7)  shoulderL(3)  shoulderR(3)
       L: x_e_r(3) x_w_r(3) ee_rot(4) gripper   R: x_e_r(3) x_w_r(3) ee_rot(4) gripper

Each frame is one line of 43 space-separated floats. Floats are written with
``repr`` (shortest round-trip form), so reading back is lossless.
Reference positions are expressed in the robot base frame; see :func:`to_world`.
"""
from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

import numpy as np

from .geom import Rotation, project_perp, rot_from_to, slerp, vec3

MAGIC = "AVTR"
VERSION = 1
N_FIELDS = 43

Pose = tuple  # (position ndarray, Rotation)


class SessionParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


class UnsupportedVersionError(ValueError):
    pass


def _frozen(v) -> np.ndarray:
    a = vec3(v)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ArmRefs:
    x_e_r: np.ndarray
    x_w_r: np.ndarray
    ee_rot: Rotation = field(default_factory=Rotation.identity)
    gripper: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x_e_r", _frozen(self.x_e_r))
        object.__setattr__(self, "x_w_r", _frozen(self.x_w_r))
        if not 0.0 <= self.gripper <= 1.0:
            raise ValueError(f"gripper openness {self.gripper} outside [0, 1]")


IDENTITY_POSE = (np.zeros(3), Rotation.identity())


@dataclass(frozen=True, eq=False)
class SessionFrame:
    t: float
    base_pose: Pose
    cam_pose: Pose
    left: ArmRefs
    right: ArmRefs
    shoulder_refs: tuple

    def __post_init__(self):
        object.__setattr__(self, "base_pose", (_frozen(self.base_pose[0]), self.base_pose[1]))
        object.__setattr__(self, "cam_pose", (_frozen(self.cam_pose[0]), self.cam_pose[1]))
        object.__setattr__(self, "shoulder_refs", tuple(_frozen(p) for p in self.shoulder_refs))

    def arm(self, side: str) -> ArmRefs:
        return self.left if side == "left" else self.right

    def shoulder(self, side: str) -> np.ndarray:
        return self.shoulder_refs[0] if side == "left" else self.shoulder_refs[1]


def frame_fields(frame: SessionFrame) -> list[float]:
    """The 43 values of a frame in wire order."""
    out = [float(frame.t)]
    for pos, rot in (frame.base_pose, frame.cam_pose):
        out += [float(c) for c in pos] + list(rot.q)
    for p in frame.shoulder_refs:
        out += [float(c) for c in p]
    for arm in (frame.left, frame.right):
        out += [float(c) for c in arm.x_e_r] + [float(c) for c in arm.x_w_r]
        out += list(arm.ee_rot.q) + [float(arm.gripper)]
    return out


def frame_from_fields(v: Sequence[float]) -> SessionFrame:
    if len(v) != N_FIELDS:
        raise ValueError(f"expected {N_FIELDS} fields, got {len(v)}")

    def pose(i):
        return (np.array(v[i:i + 3]), Rotation.from_quat(v[i + 3:i + 7]))

    def arm(i):
        return ArmRefs(np.array(v[i:i + 3]), np.array(v[i + 3:i + 6]), Rotation.from_quat(v[i + 6:i + 10]), v[i + 10])

    return SessionFrame(
        t=v[0], base_pose=pose(1), cam_pose=pose(8),
        shoulder_refs=(np.array(v[15:18]), np.array(v[18:21])),
        left=arm(21), right=arm(32),
    )


def format_frame(frame: SessionFrame) -> str:
    return " ".join(repr(float(x)) for x in frame_fields(frame))


def format_header(rate_hz: float) -> str:
    return f"{MAGIC} {VERSION} {float(rate_hz)!r}"


def parse_header(line: str) -> float:
    parts = line.split()
    if len(parts) != 3 or parts[0] != MAGIC:
        raise SessionParseError(1, f"bad header {line.strip()!r}")
    if parts[1] != str(VERSION):
        raise UnsupportedVersionError(f"unsupported session version {parts[1]!r}")
    try:
        return float(parts[2])
    except ValueError:
        raise SessionParseError(1, f"bad rate {parts[2]!r}") from None


def parse_frame(line: str, lineno: int = 0) -> SessionFrame:
    parts = line.split()
    if len(parts) != N_FIELDS:
        raise SessionParseError(lineno, f"expected {N_FIELDS} fields, got {len(parts)}")
    try:
        vals = [float(p) for p in parts]
    except ValueError as e:
        raise SessionParseError(lineno, str(e)) from None
    if not all(math.isfinite(x) for x in vals):
        raise SessionParseError(lineno, "non-finite value")
    try:
        return frame_from_fields(vals)
    except ValueError as e:
        raise SessionParseError(lineno, str(e)) from None


def write_session(frames: Iterable[SessionFrame], path, rate_hz: float) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_header(rate_hz) + "\n")
        for fr in frames:
            f.write(format_frame(fr) + "\n")


def read_session(path) -> tuple[float, list[SessionFrame]]:
    """Return ``(rate_hz, frames)``."""
    with open(path, encoding="utf-8") as f:
        return parse_session(f)


def parse_session(lines: Iterable[str]) -> tuple[float, list[SessionFrame]]:
    it = iter(lines)
    try:
        header = next(it)
    except StopIteration:
        raise SessionParseError(1, "empty session file") from None
    rate = parse_header(header)
    frames = []
    for lineno, line in enumerate(it, start=2):
        if not line.strip():
            continue
        frames.append(parse_frame(line, lineno))
    return rate, frames


def session_bytes(frames: Iterable[SessionFrame], rate_hz: float) -> bytes:
    buf = io.StringIO()
    buf.write(format_header(rate_hz) + "\n")
    for fr in frames:
        buf.write(format_frame(fr) + "\n")
    return buf.getvalue().encode("utf-8")


# -- world frame -------------------------------------------------------------

def to_world(frame: SessionFrame, base_pose: Pose | None = None) -> SessionFrame:
    """Express the frame's references in the world frame using ``base_pose``
    (defaults to the frame's own, possibly filtered, base pose)."""
    pos, rot = base_pose if base_pose is not None else frame.base_pose

    def tf(p):
        return rot.apply(p) + pos

    def arm(a: ArmRefs):
        return ArmRefs(tf(a.x_e_r), tf(a.x_w_r), rot * a.ee_rot, a.gripper)

    return replace(frame, left=arm(frame.left), right=arm(frame.right),
                   shoulder_refs=tuple(tf(p) for p in frame.shoulder_refs),
                   base_pose=IDENTITY_POSE)


# -- low-pass filter ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FilterState:
    pose: Pose | None = None
    beta: float = 0.2

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")


def ema_filter(state: FilterState, raw: Pose) -> tuple[FilterState, Pose]:
    """Exponential smoothing of a rigid pose; the first sample initialises the state."""
    raw_p, raw_r = np.asarray(raw[0], dtype=float), raw[1]
    if state.pose is None:
        out = (raw_p.copy(), raw_r)
    else:
        p, r = state.pose
        b = state.beta
        if b == 1.0:
            out = (raw_p.copy(), raw_r)
        else:
            out = ((1.0 - b) * p + b * raw_p, slerp(r, raw_r, b))
    return FilterState(out, state.beta), out


def add_tracking_noise(frames: Sequence[SessionFrame], rng: np.random.Generator,
                       pos_noise: float = 0.005, rot_noise_deg: float = 1.0) -> list[SessionFrame]:
    """Perturb base poses with uniform positional noise and bounded rotational noise."""
    out = []
    for fr in frames:
        p, r = fr.base_pose
        dp = rng.uniform(-pos_noise, pos_noise, 3)
        axis = rng.normal(size=3)
        ang = math.radians(rot_noise_deg) * rng.uniform(0.0, 1.0)
        out.append(replace(fr, base_pose=(p + dp, Rotation.from_axis_angle(axis, ang) * r)))
    return out


# -- synthetic sessions ------------------------------------------------------

SHOULDER_HALF_WIDTH = 0.18
SHOULDER_HEIGHT = 1.10
ROBOT_UPPER_LEN = 0.27
ROBOT_FORE_LEN = 0.29


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> Pose:
    """Camera pose looking from ``eye`` at ``target``.

    Camera axes: x right, y up, viewing along -z.
    """
    eye = vec3(eye)
    fwd = vec3(target) - eye
    fwd /= np.linalg.norm(fwd)
    right = np.cross(fwd, vec3(up))
    right /= np.linalg.norm(right)
    cam_up = np.cross(right, fwd)
    return eye, Rotation.from_matrix(np.column_stack([right, cam_up, -fwd]))


# standing patient 1.5 m in front of the robot, eyes at 1.6 m
DEFAULT_CAMERA = look_at((0.0, 1.5, 1.6), (0.0, 0.0, 1.1))


def mirror_point(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    return np.array([-p[0], p[1], p[2]])


def mirror_rotation(r: Rotation) -> Rotation:
    """Conjugate by the reflection x -> -x."""
    w, x, y, z = r.q
    return Rotation(w, x, -y, -z)


def _unit(*v) -> np.ndarray:
    a = np.array(v, dtype=float)
    return a / np.linalg.norm(a)


def _arm_frame(u_dir, f_dir, wrist_twist_deg: float, gripper: float, t: float,
               cam: Pose = DEFAULT_CAMERA) -> SessionFrame:
    """Symmetric frame from right-arm unit directions; the left arm is the mirror image."""
    s_r = np.array([SHOULDER_HALF_WIDTH, 0.0, SHOULDER_HEIGHT])
    e_r = s_r + ROBOT_UPPER_LEN * np.asarray(u_dir)
    w_r = e_r + ROBOT_FORE_LEN * np.asarray(f_dir)
    f = np.asarray(f_dir)
    ee = Rotation.from_axis_angle(f, math.radians(wrist_twist_deg)) * rot_from_to((1.0, 0.0, 0.0), f)
    right = ArmRefs(e_r, w_r, ee, gripper)
    left = ArmRefs(mirror_point(e_r), mirror_point(w_r), mirror_rotation(ee), gripper)
    return SessionFrame(t=t, base_pose=IDENTITY_POSE, cam_pose=cam, left=left, right=right,
                        shoulder_refs=(mirror_point(s_r), s_r))


_DOWN = _unit(0, 0, -1)
_UP_80 = _unit(math.cos(math.radians(80)), 0, math.sin(math.radians(80)))
_FRONT = _unit(0.5, 1.0, 0.0)

# (upper-arm dir, forearm dir, wrist twist deg, gripper) for the right arm.
CATALOG = (
    (_DOWN, _unit(0, 1, 0), 0.0, 0.2),            # 1 hands down, forearm forward
    (_DOWN, _DOWN, 0.0, 0.0),                     # 2 hands down, straight (colinear)
    (_DOWN, _unit(0, -1, 0), 0.0, 0.2),           # 3 hands down, forearm backward
    (_UP_80, _unit(0, 1, 1), 20.0, 0.5),          # 4 hands up, forearm forward
    (_UP_80, _unit(0, 0, 1), 0.0, 1.0),           # 5 hands up, forearm upright
    (_UP_80, _unit(0, -1, 1), -20.0, 0.5),        # 6 hands up, forearm backward
    (_unit(1, 0, 0), _unit(1, 0, 0), 0.0, 0.0),   # 7 T-pose
    (_FRONT, _unit(0, 1, 0), 10.0, 0.3),          # 8 arms in front, forearm ahead
    (_FRONT, _unit(-0.6, 0.8, 0), 30.0, 0.6),     # 9 arms in front, forearms inward
    (_unit(0.5, 1, -0.5), _unit(0, 0.3, 1), 0.0, 0.4),      # 10 in front, forearm raised
    (_unit(0.6, 1, -0.8), _unit(-0.2, 0.9, 0.3), -15.0, 0.8),  # 11 in front, low
    (_unit(1, 0, -1), _unit(1, 0, -1), 0.0, 0.0),  # 12 A-pose
)

HANDS_DOWN = (0, 1, 2)


def pose_catalog(cam: Pose = DEFAULT_CAMERA) -> list[SessionFrame]:
    """Twelve symmetric static poses: hands down (1-3), hands up (4-6), T-pose (7),
    arms in front (8-11) and A-pose (12). Frame ``i`` has ``t = i`` seconds."""
    return [_arm_frame(u, f, tw, g, float(i), cam) for i, (u, f, tw, g) in enumerate(CATALOG)]


THERAPY_UPPER = _unit(0.6, 0.75, -0.3)
THERAPY_CAMERA = DEFAULT_CAMERA


def therapy_hinge(t: float, duration: float, max_hinge: float = math.pi / 2) -> float:
    """Elbow excursion 0 -> max -> 0 over the session, smooth at both ends."""
    return max_hinge * 0.5 * (1.0 - math.cos(2.0 * math.pi * t / duration))


def therapy_trajectory(duration: float = 20.0, rate: float = 100.0,
                       cam: Pose = THERAPY_CAMERA) -> list[SessionFrame]:
    """Elbow held fixed while the wrist sweeps a circular arc about it.

    The forearm rotates in the vertical plane through the upper arm, from
    straight to a right angle and back. ``duration * rate + 1`` frames.
    """
    if not duration > 0 or not rate > 0:
        raise ValueError("duration and rate must be positive")
    n = int(round(duration * rate))
    u = THERAPY_UPPER
    up = project_perp((0.0, 0.0, 1.0), u)
    up /= np.linalg.norm(up)
    frames = []
    for i in range(n + 1):
        t = i / rate
        h = therapy_hinge(t, duration)
        f = math.cos(h) * u + math.sin(h) * up
        frames.append(_arm_frame(u, f, 0.0, 0.5, t, cam))
    return frames

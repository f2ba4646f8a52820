"""Human arm model: default configuration, joint limits, forward kinematics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geom import (
    Rotation,
    cross3,
    norm3,
    angle_between,
    exp_map,
    project_perp,
    rot_from_to,
    signed_twist_angle,
    swing_twist,
    vec3,
)

# slack before a joint value counts as out of range; keeps clamp_pose idempotent
_LIMIT_SLACK = 1e-12


@dataclass(frozen=True)
class JointConstraints:
    swing_max: float = math.radians(85.0)
    twist_min: float = math.radians(-75.0)
    twist_max: float = math.radians(75.0)
    hinge_min: float = 0.0
    hinge_max: float = math.radians(150.0)
    stretch_min: float = 0.8
    stretch_max: float = 1.3

    def __post_init__(self):
        if not self.swing_max > 0:
            raise ValueError("swing_max must be positive")
        if not self.twist_min < self.twist_max:
            raise ValueError("twist_min must be below twist_max")
        if not self.hinge_min <= self.hinge_max:
            raise ValueError("hinge_min must not exceed hinge_max")
        if not 0 < self.stretch_min <= 1 <= self.stretch_max:
            raise ValueError("stretch range must satisfy 0 < min <= 1 <= max")


@dataclass(frozen=True, eq=False)
class HumanArmModel:
    """One arm of the human model in its default (unposed) configuration.

    ``d_u_h`` runs shoulder to elbow, ``d_f_h`` elbow to wrist, ``a_h`` is the
    elbow hinge axis and ``w_vec`` the wrist vector roughly normal to the palm.
    """

    side: str
    x_s_h: np.ndarray
    d_u_h: np.ndarray
    d_f_h: np.ndarray
    a_h: np.ndarray
    w_vec: np.ndarray
    constraints: JointConstraints = field(default_factory=JointConstraints)

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")
        for name in ("x_s_h", "d_u_h", "d_f_h", "a_h", "w_vec"):
            v = vec3(getattr(self, name))
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        for name in ("d_u_h", "d_f_h", "a_h", "w_vec"):
            if norm3(getattr(self, name)) == 0.0:
                raise ValueError(f"{name} must be nonzero")
        if norm3(cross3(self.a_h, self.d_u_h)) < 1e-9 * norm3(self.a_h) * norm3(self.d_u_h):
            raise ValueError("elbow axis a_h must not be parallel to d_u_h")

    @property
    def upper_len(self) -> float:
        return norm3(self.d_u_h)

    @property
    def fore_len(self) -> float:
        return norm3(self.d_f_h)

    @property
    def default_elbow(self) -> np.ndarray:
        return self.x_s_h + self.d_u_h

    @property
    def default_wrist(self) -> np.ndarray:
        return self.x_s_h + self.d_u_h + self.d_f_h

    @property
    def default_bend(self) -> float:
        """Signed inter-segment angle of the default configuration about ``a_h``."""
        return _signed_angle(self.d_u_h, self.d_f_h, self.a_h)

    def transformed(self, alignment: BodyAlignment) -> HumanArmModel:
        r = alignment.rotation
        return replace(
            self,
            x_s_h=alignment.apply(self.x_s_h),
            d_u_h=r.apply(self.d_u_h),
            d_f_h=r.apply(self.d_f_h),
            a_h=r.apply(self.a_h),
            w_vec=r.apply(self.w_vec),
        )


@dataclass(frozen=True)
class ArmPose:
    """Solver output. Rotations are world-frame and act on the default vectors."""

    R_s: Rotation
    R_e: Rotation
    R_w: Rotation
    S_u: float = 1.0
    S_f: float = 1.0
    flags: frozenset = frozenset()

    def __post_init__(self):
        if not (self.S_u > 0 and self.S_f > 0):
            raise ValueError("stretch factors must be positive")

    @classmethod
    def identity(cls) -> ArmPose:
        i = Rotation.identity()
        return cls(i, i, i, 1.0, 1.0)


@dataclass(frozen=True, eq=False)
class BodyAlignment:
    """Rigid transform ``p -> rotation.apply(p) + translation``."""

    translation: np.ndarray
    rotation: Rotation

    def apply(self, p) -> np.ndarray:
        return self.rotation.apply(p) + self.translation


def default_model(side: str = "right", *, shoulder_half_width: float = 0.18, shoulder_height: float = 1.10,
                  upper_len: float = 0.25, fore_len: float = 0.24,
                  constraints: JointConstraints | None = None) -> HumanArmModel:
    """T-pose arm. The world is z-up with the model facing +y, so the right arm lies along +x.

    The hinge axis is mirrored between sides so that a positive hinge lifts
    the forearm upward in the T-pose on both arms.
    """
    sgn = 1.0 if side == "right" else -1.0
    return HumanArmModel(
        side=side,
        x_s_h=np.array([sgn * shoulder_half_width, 0.0, shoulder_height]),
        d_u_h=np.array([sgn * upper_len, 0.0, 0.0]),
        d_f_h=np.array([sgn * fore_len, 0.0, 0.0]),
        a_h=np.array([0.0, -sgn, 0.0]),
        w_vec=np.array([0.0, 0.0, 1.0]),
        constraints=constraints or JointConstraints(),
    )


def align_body(model_shoulders, robot_shoulders) -> BodyAlignment:
    """Transform making the model's shoulder segment parallel to the robot's
    (same left-to-right direction) with a shared midpoint."""
    ml, mr = (vec3(p) for p in model_shoulders)
    rl, rr = (vec3(p) for p in robot_shoulders)
    dm, dr = mr - ml, rr - rl
    if norm3(dm) == 0.0 or norm3(dr) == 0.0:
        raise ValueError("degenerate shoulder segment")
    rot = rot_from_to(dm, dr)
    return BodyAlignment(translation=0.5 * (rl + rr) - rot.apply(0.5 * (ml + mr)), rotation=rot)


def fk_arm(model: HumanArmModel, pose: ArmPose) -> tuple[np.ndarray, np.ndarray]:
    elbow = model.x_s_h + pose.R_s.apply(pose.S_u * model.d_u_h)
    wrist = elbow + pose.R_e.apply(pose.S_f * model.d_f_h)
    return elbow, wrist


def _signed_angle(x, y, axis) -> float:
    xp = project_perp(x, axis)
    yp = project_perp(y, axis)
    if np.linalg.norm(xp) == 0.0 or np.linalg.norm(yp) == 0.0:
        return 0.0
    return math.atan2(float(np.dot(cross3(xp, yp), axis)) / np.linalg.norm(axis), float(np.dot(xp, yp)))


def shoulder_angles(pose: ArmPose, model: HumanArmModel) -> tuple[Rotation, Rotation, float, float]:
    """Swing/twist split of the shoulder about the default upper-arm axis.

    Returns ``(swing, twist, swing_angle, twist_angle)``. Twisting about the
    default axis before the swing is the same rotation as twisting about the
    current upper-arm direction after it, so the angles agree.
    """
    swing, twist = swing_twist(pose.R_s, model.d_u_h)
    return swing, twist, swing.angle, signed_twist_angle(twist, model.d_u_h)


def hinge_angle(pose: ArmPose, model: HumanArmModel) -> float:
    """Elbow flexion relative to the default bend, signed by the posed hinge axis."""
    axis = pose.R_s.apply(model.a_h)
    bend = _signed_angle(pose.R_s.apply(model.d_u_h), pose.R_e.apply(model.d_f_h), axis)
    return _wrap(bend - model.default_bend)


def _wrap(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def _clamp_circular(a: float, lo: float, hi: float) -> float:
    if lo - _LIMIT_SLACK <= a <= hi + _LIMIT_SLACK:
        return a
    d_lo = abs(_wrap(a - lo))
    d_hi = abs(_wrap(a - hi))
    return lo if d_lo <= d_hi else hi


def clamp_pose(pose: ArmPose, model: HumanArmModel) -> ArmPose:
    """Project a pose onto the joint constraints.

    Components already within limits are left untouched; an in-limit pose is
    returned as is.
    """
    c = model.constraints
    R_s, R_e = pose.R_s, pose.R_e
    changed = False

    swing, twist, swing_angle, twist_angle = shoulder_angles(pose, model)
    new_swing = swing
    if swing_angle > c.swing_max + _LIMIT_SLACK:
        new_swing = Rotation.from_axis_angle(swing.axis, c.swing_max)
    new_twist = twist
    t = _clamp_circular(twist_angle, c.twist_min, c.twist_max)
    if t != twist_angle:
        new_twist = Rotation.from_axis_angle(model.d_u_h, t)
    if new_swing is not swing or new_twist is not twist:
        R_s_new = new_swing * new_twist
        # carry the forearm rigidly with the upper arm
        R_e = R_s_new * R_s.inverse() * R_e
        R_s = R_s_new
        changed = True

    probe = ArmPose(R_s, R_e, pose.R_w, pose.S_u, pose.S_f)
    h = hinge_angle(probe, model)
    hc = _clamp_circular(h, c.hinge_min, c.hinge_max)
    if hc != h:
        R_e = Rotation.from_axis_angle(R_s.apply(model.a_h), hc - h) * R_e
        changed = True

    S_u = min(max(pose.S_u, c.stretch_min), c.stretch_max)
    S_f = min(max(pose.S_f, c.stretch_min), c.stretch_max)
    if S_u != pose.S_u or S_f != pose.S_f:
        changed = True
    if not changed:
        return pose
    return ArmPose(R_s, R_e, pose.R_w, S_u, S_f, pose.flags)


def satisfies_constraints(pose: ArmPose, model: HumanArmModel, tol: float = 1e-9) -> bool:
    c = model.constraints
    _, _, swing, twist = shoulder_angles(pose, model)
    h = hinge_angle(pose, model)
    return (swing <= c.swing_max + tol
            and c.twist_min - tol <= twist <= c.twist_max + tol
            and c.hinge_min - tol <= h <= c.hinge_max + tol
            and c.stretch_min - tol <= pose.S_u <= c.stretch_max + tol
            and c.stretch_min - tol <= pose.S_f <= c.stretch_max + tol)


def pose_from_parameters(model: HumanArmModel, swing_vec, twist: float, hinge: float,
                         S_u: float, S_f: float, R_w: Rotation | None = None) -> ArmPose:
    """Pose from shoulder swing (rotation vector normal to the upper arm),
    shoulder twist, elbow hinge and stretch factors."""
    R_s = exp_map(swing_vec) * Rotation.from_axis_angle(model.d_u_h, twist)
    R_e = R_s * Rotation.from_axis_angle(model.a_h, hinge)
    return ArmPose(R_s, R_e, R_w or Rotation.identity(), S_u, S_f)


ANGLE_CLOSED = math.radians(5.0)
ANGLE_OPEN = math.radians(60.0)


def gripper_to_gesture(openness: float, angle_closed: float = ANGLE_CLOSED,
                       angle_open: float = ANGLE_OPEN) -> float:
    """Linear map from gripper openness in [0, 1] to the thumb-index angle."""
    g = min(max(float(openness), 0.0), 1.0)
    return angle_closed + g * (angle_open - angle_closed)

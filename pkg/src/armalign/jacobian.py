"""Damped-least-squares Jacobian baseline with a weighted elbow objective.

Parameters ``theta`` (6):

    0, 1  shoulder swing as an exponential map in the plane normal to the
          default upper arm (coordinates along ``e1``, ``e2``)
    2     shoulder twist about the default upper arm
    3     elbow hinge about the default elbow axis
    4, 5  upper-arm and forearm stretch factors

The stacked task vector is ``[p_w, w_e * p_e]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .armmodel import ArmPose, HumanArmModel
from .geom import Rotation, cross3, exp_map, left_jacobian, skew
from .session import ArmRefs


class SolverDivergedError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class JacobianState:
    theta: np.ndarray
    lam: float = 0.2
    w_e: float = 0.1
    step_cap: float = 0.5

    def __post_init__(self):
        th = np.array(self.theta, dtype=float).reshape(6)
        if not np.all(np.isfinite(th)):
            raise SolverDivergedError(f"non-finite parameters {th}")
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)
        if not self.lam > 0:
            raise ValueError("damping must be positive")
        if not self.w_e >= 0:
            raise ValueError("elbow weight must be non-negative")

    def with_theta(self, theta) -> JacobianState:
        return replace(self, theta=theta)


INIT_HINGE = math.radians(20.0)


def initial_state(lam: float = 0.2, w_e: float = 0.1, step_cap: float = 0.5,
                  hinge: float = INIT_HINGE) -> JacobianState:
    """T-pose with the elbow pre-bent, away from the straight-arm singularity."""
    return JacobianState(np.array([0.0, 0.0, 0.0, hinge, 1.0, 1.0]), lam, w_e, step_cap)


@lru_cache(maxsize=64)
def swing_basis(model: HumanArmModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(e1, e2, u)``: orthonormal frame with ``u`` along the default upper arm."""
    u = model.d_u_h / model.upper_len
    e1 = model.a_h - np.dot(model.a_h, u) * u
    e1 /= np.linalg.norm(e1)
    return e1, cross3(u, e1), u


def _rotations(theta, model):
    e1, e2, u = swing_basis(model)
    v = theta[0] * e1 + theta[1] * e2
    swing = exp_map(v)
    R_s = swing * Rotation.from_axis_angle(u, theta[2])
    R_e = R_s * Rotation.from_axis_angle(model.a_h, theta[3])
    return v, swing, R_s, R_e, (e1, e2, u)


def theta_to_pose(theta, model: HumanArmModel, R_w: Rotation | None = None) -> ArmPose:
    _, _, R_s, R_e, _ = _rotations(theta, model)
    return ArmPose(R_s, R_e, R_w or Rotation.identity(), float(theta[4]), float(theta[5]))


def fk_theta(theta, model: HumanArmModel) -> tuple[np.ndarray, np.ndarray]:
    _, _, R_s, R_e, _ = _rotations(theta, model)
    p_e = model.x_s_h + R_s.apply(theta[4] * model.d_u_h)
    return p_e, p_e + R_e.apply(theta[5] * model.d_f_h)


def residual(state: JacobianState, model: HumanArmModel, refs: ArmRefs) -> np.ndarray:
    p_e, p_w = fk_theta(state.theta, model)
    return np.concatenate([p_w - refs.x_w_r, state.w_e * (p_e - refs.x_e_r)])


def jacobian(state: JacobianState, model: HumanArmModel) -> np.ndarray:
    """Analytic d[p_w, w_e p_e]/d theta, shape (6, 6)."""
    th = state.theta
    v, swing, R_s, R_e, (e1, e2, u) = _rotations(th, model)
    upper = R_s.apply(th[4] * model.d_u_h)
    fore = R_e.apply(th[5] * model.d_f_h)
    p_e_rel = upper
    p_w_rel = upper + fore

    # d/dv exp(v) y = -[exp(v) y]x J_l(v)
    jl = left_jacobian(v)
    basis = np.column_stack([e1, e2])
    d_swing_e = -skew(p_e_rel) @ jl @ basis
    d_swing_w = -skew(p_w_rel) @ jl @ basis

    twist_axis = swing.apply(u)
    hinge_axis = R_s.apply(model.a_h / np.linalg.norm(model.a_h))

    J = np.zeros((6, 6))
    J[0:3, 0:2] = d_swing_w
    J[0:3, 2] = cross3(twist_axis, p_w_rel)
    J[0:3, 3] = cross3(hinge_axis, fore)
    J[0:3, 4] = R_s.apply(model.d_u_h)
    J[0:3, 5] = R_e.apply(model.d_f_h)
    J[3:6, 0:2] = state.w_e * d_swing_e
    J[3:6, 2] = state.w_e * cross3(twist_axis, p_e_rel)
    J[3:6, 4] = state.w_e * R_s.apply(model.d_u_h)
    return J


def dls_delta(J: np.ndarray, dp: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """``dtheta = J^T (J J^T + lam^2 I)^-1 dp``; also returns the inner solution ``y``."""
    A = J @ J.T + (lam * lam) * np.eye(J.shape[0])
    try:
        y = np.linalg.solve(A, dp)
    except np.linalg.LinAlgError as e:
        raise SolverDivergedError(str(e)) from e
    dtheta = J.T @ y
    if not np.all(np.isfinite(dtheta)):
        raise SolverDivergedError("non-finite DLS step")
    return dtheta, y


def project_theta(theta, model: HumanArmModel) -> np.ndarray:
    """Clamp parameters onto the joint limits (swing cone, twist, hinge, stretch)."""
    c = model.constraints
    th = np.array(theta, dtype=float)
    s = math.hypot(th[0], th[1])
    if s > c.swing_max:
        # land inside the cone so that projecting again is a no-op
        f = c.swing_max / s
        while math.hypot(th[0] * f, th[1] * f) > c.swing_max:
            f = math.nextafter(f, 0.0)
        th[0:2] *= f
    th[2] = min(max(th[2], c.twist_min), c.twist_max)
    th[3] = min(max(th[3], c.hinge_min), c.hinge_max)
    th[4] = min(max(th[4], c.stretch_min), c.stretch_max)
    th[5] = min(max(th[5], c.stretch_min), c.stretch_max)
    return th


def dls_step(state: JacobianState, model: HumanArmModel, refs: ArmRefs) -> JacobianState:
    r = residual(state, model, refs)
    if not r.any():
        return state
    dtheta, _ = dls_delta(jacobian(state, model), -r, state.lam)
    n = np.linalg.norm(dtheta)
    if n > state.step_cap:
        dtheta *= state.step_cap / n
    return state.with_theta(project_theta(state.theta + dtheta, model))


@dataclass(frozen=True)
class JacobianResult:
    pose: ArmPose
    iterations: int
    converged: bool
    state: JacobianState


def jacobian_solve(state: JacobianState, model: HumanArmModel, refs: ArmRefs,
                   max_iters: int = 100, tol: float = 1e-3) -> JacobianResult:
    """Iterate DLS steps until the wrist residual drops below ``tol``.

    At least one step is always taken, so a warm start at the solution
    reports a single iteration.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    converged = False
    it = 0
    while it < max_iters:
        state = dls_step(state, model, refs)
        it += 1
        if np.linalg.norm(residual(state, model, refs)[:3]) < tol:
            converged = True
            break
    return JacobianResult(theta_to_pose(state.theta, model, refs.ee_rot), it, converged, state)


class JacobianSolver:
    """Per-arm solver warm-started from its previous solution."""

    name = "jacobian"

    def __init__(self, model: HumanArmModel, lam: float = 0.2, w_e: float = 0.1, step_cap: float = 0.5,
                 max_iters: int = 100, tol: float = 1e-3):
        self.model = model
        self.max_iters = max_iters
        self.tol = tol
        self.state = initial_state(lam, w_e, step_cap)
        self.last: JacobianResult | None = None

    def solve(self, refs: ArmRefs, model: HumanArmModel | None = None) -> ArmPose:
        self.last = jacobian_solve(self.state, model or self.model, refs, self.max_iters, self.tol)
        self.state = self.last.state
        return self.last.pose

"""FABRIK baseline where every joint has a reference and a tolerance sphere.

A joint is repositioned on the segment from its freshly updated neighbour to
the point closest to it inside a radius-``eps`` sphere about its reference.
The elbow tolerance is tightened by binary search.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .armmodel import ArmPose, HumanArmModel, hinge_angle
from .geom import Rotation, cross3, rot_from_to, signed_twist_angle, twist_from_to
from .session import ArmRefs

SINGULAR = "fabrik_singular"

_FEAS_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class FabrikState:
    shoulder: np.ndarray
    elbow: np.ndarray
    wrist: np.ndarray
    eps_e: float = math.inf
    eps_w: float = 0.005
    eps_max: float = 0.30
    d_eps: float = 0.002
    n_init: int = 8
    n_refine: int = 5

    def __post_init__(self):
        if min(self.eps_e, self.eps_w) < 0:
            raise ValueError("tolerances must be non-negative")
        for name in ("shoulder", "elbow", "wrist"):
            v = np.array(getattr(self, name), dtype=float).reshape(3)
            if not np.all(np.isfinite(v)):
                raise ValueError(f"non-finite {name} position")
            object.__setattr__(self, name, v)


def initial_state(model: HumanArmModel, **search) -> FabrikState:
    return FabrikState(model.x_s_h, model.default_elbow, model.default_wrist, **search)


def _closest_in_sphere(p, center, eps) -> np.ndarray:
    d = p - center
    n = np.linalg.norm(d)
    if n <= eps:
        return p
    return center + d * (eps / n)


def reposition(joint, child_updated, ref, eps: float, seg_len_bounds: tuple[float, float]) -> np.ndarray:
    """New joint position on the ray from ``child_updated`` towards the point
    of the ``eps``-sphere about ``ref`` nearest to ``joint``, at a distance
    clamped into ``seg_len_bounds``."""
    joint = np.asarray(joint, dtype=float)
    child = np.asarray(child_updated, dtype=float)
    q = joint if ref is None else _closest_in_sphere(joint, np.asarray(ref, dtype=float), eps)
    d = q - child
    n = np.linalg.norm(d)
    if n == 0.0:
        d = joint - child
        n = np.linalg.norm(d)
        if n == 0.0:
            return child.copy()
    lo, hi = seg_len_bounds
    return child + d * (min(max(n, lo), hi) / n)


def _limit_cone(direction, axis, max_angle) -> np.ndarray:
    """Rotate ``direction`` toward ``axis`` so the angle between them is at most ``max_angle``."""
    a = axis / np.linalg.norm(axis)
    n = np.linalg.norm(direction)
    d = direction / n
    cos = float(np.dot(a, d))
    if cos >= math.cos(max_angle):
        return direction
    perp = d - cos * a
    pn = np.linalg.norm(perp)
    if pn < 1e-12:
        perp = cross3(a, [0.0, 0.0, 1.0])
        if np.linalg.norm(perp) < 1e-8:
            perp = cross3(a, [1.0, 0.0, 0.0])
        pn = np.linalg.norm(perp)
    return n * (math.cos(max_angle) * a + math.sin(max_angle) * perp / pn)


def _bounds(model: HumanArmModel, length: float) -> tuple[float, float]:
    c = model.constraints
    return c.stretch_min * length, c.stretch_max * length


def fabrik_pass(state: FabrikState, model: HumanArmModel, refs: ArmRefs, n: int = 1) -> FabrikState:
    """``n`` iterations of a forward (wrist to shoulder) and a backward
    (shoulder to wrist) reach. The shoulder stays pinned at the model shoulder."""
    if n < 1:
        raise ValueError("n must be at least 1")
    c = model.constraints
    u_bounds = _bounds(model, model.upper_len)
    f_bounds = _bounds(model, model.fore_len)
    s = np.asarray(model.x_s_h, dtype=float)
    e, w = state.elbow, state.wrist
    for _ in range(n):
        # forward: wrist first, then the elbow hangs off it
        w = _closest_in_sphere(w, refs.x_w_r, state.eps_w)
        e = reposition(e, w, refs.x_e_r, state.eps_e, f_bounds)
        # backward: from the pinned shoulder outwards, with rotational limits
        e = reposition(e, s, refs.x_e_r, state.eps_e, u_bounds)
        e = s + _limit_cone(e - s, model.d_u_h, c.swing_max)
        w = reposition(w, e, refs.x_w_r, state.eps_w, f_bounds)
        w = e + _limit_cone(w - e, e - s, c.hinge_max)
    return replace(state, shoulder=s.copy(), elbow=e, wrist=w)


def is_feasible(state: FabrikState, refs: ArmRefs, eps_e: float | None = None) -> bool:
    eps_e = state.eps_e if eps_e is None else eps_e
    return (np.linalg.norm(state.elbow - refs.x_e_r) <= eps_e + _FEAS_SLACK
            and np.linalg.norm(state.wrist - refs.x_w_r) <= state.eps_w + _FEAS_SLACK)


@dataclass(frozen=True)
class FabrikResult:
    pose: ArmPose
    achieved_eps_e: float
    success: bool
    state: FabrikState
    twist: float = 0.0
    probes: tuple = field(default=())


def fabrik_solve(state: FabrikState, model: HumanArmModel, refs: ArmRefs,
                 prev_twist: float = 0.0) -> FabrikResult:
    """Unconstrained-elbow pass, then binary search on the elbow tolerance.

    ``probes`` records ``(eps_e, feasible)`` for every search step.
    """
    best = fabrik_pass(replace(state, eps_e=math.inf), model, refs, state.n_init)
    if not is_feasible(best, refs):
        pose, twist = positions_to_pose(best, model, refs, prev_twist)
        return FabrikResult(pose, math.inf, False, best, twist)

    dev = float(np.linalg.norm(best.elbow - refs.x_e_r))
    lo, hi = 0.0, state.eps_max
    probes = []
    if dev > hi:
        # unconstrained solution misses the search window; keep it as is
        hi = dev
    else:
        best = replace(best, eps_e=hi)
        while hi - lo > state.d_eps:
            mid = 0.5 * (lo + hi)
            trial = fabrik_pass(replace(best, eps_e=mid), model, refs, state.n_refine)
            ok = is_feasible(trial, refs)
            probes.append((mid, ok))
            if ok:
                hi, best = mid, trial
            else:
                lo = mid
    best = replace(best, eps_e=hi)
    pose, twist = positions_to_pose(best, model, refs, prev_twist)
    return FabrikResult(pose, hi, is_feasible(best, refs), best, twist, tuple(probes))


def positions_to_pose(state: FabrikState, model: HumanArmModel, refs: ArmRefs,
                      prev_twist: float = 0.0) -> tuple[ArmPose, float]:
    """Rotations from solved joint positions.

    Shoulder: swing onto the solved upper arm, then the elbow-axis aligning
    twist clamped to the twist limits. A straight chain has no elbow axis, so
    ``prev_twist`` is reused and the pose is flagged. Elbow: swing onto the
    solved forearm with the hinge clamped. Returns ``(pose, twist_angle)``.
    """
    c = model.constraints
    u = state.elbow - state.shoulder
    f = state.wrist - state.elbow
    swing = rot_from_to(model.d_u_h, u)
    a = cross3(u, f)
    flags = frozenset()
    if np.linalg.norm(a) < 1e-8 * np.linalg.norm(u) * np.linalg.norm(f):
        twist = prev_twist
        flags = frozenset({SINGULAR})
    else:
        R_twist = twist_from_to(swing.apply(model.a_h), a, u)
        twist = signed_twist_angle(R_twist, u)
    twist = min(max(twist, c.twist_min), c.twist_max)
    R_s = Rotation.from_axis_angle(u, twist) * swing

    R_e = rot_from_to(R_s.apply(model.d_f_h), f) * R_s
    pose = ArmPose(R_s, R_e, refs.ee_rot, np.linalg.norm(u) / model.upper_len, np.linalg.norm(f) / model.fore_len, flags)
    h = hinge_angle(pose, model)
    hc = min(max(h, c.hinge_min), c.hinge_max)
    if hc != h:
        R_e = Rotation.from_axis_angle(R_s.apply(model.a_h), hc - h) * R_e
        pose = replace(pose, R_e=R_e)
    return pose, twist


class FabrikSolver:
    """Per-arm solver carrying joint positions and shoulder twist across frames."""

    name = "fabrik"

    def __init__(self, model: HumanArmModel, **search):
        self.model = model
        self.state = initial_state(model, **search)
        self.prev_twist = 0.0
        self.last: FabrikResult | None = None

    def solve(self, refs: ArmRefs, model: HumanArmModel | None = None) -> ArmPose:
        model = model or self.model
        res = fabrik_solve(self.state, model, refs, self.prev_twist)
        self.last = res
        self.state = res.state
        self.prev_twist = res.twist
        return res.pose

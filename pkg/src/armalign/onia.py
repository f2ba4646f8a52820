"""Optimal non-iterative alignment (ONIA).

A closed-form sequence of swings, stretches and twists that puts the model's
elbow and wrist exactly on the robot's reference positions, with the shoulder
twist chosen to minimise the angle between the two elbow axes.
"""
from __future__ import annotations

from dataclasses import dataclass


from .armmodel import ArmPose, HumanArmModel
from .geom import cross3, norm3, rot_from_to, rotation_pow, twist_from_to
from .session import ArmRefs

DEGENERATE_ELBOW_AXIS = "degenerate_elbow_axis"

# ||d_u × d_f|| / (||d_u|| ||d_f||) below this means a straight arm
DEGENERACY_EPS = 1e-8


@dataclass(frozen=True)
class OniaParams:
    alpha_e: float = 0.4

    def __post_init__(self):
        if not 0.0 <= self.alpha_e <= 1.0:
            raise ValueError("alpha_e must lie in [0, 1]")


def onia_solve(model: HumanArmModel, refs: ArmRefs, params: OniaParams = OniaParams()) -> ArmPose:
    # arm axes; the upper arm starts at the model's own shoulder
    d_u_r = refs.x_e_r - model.x_s_h
    d_f_r = refs.x_w_r - refs.x_e_r
    n_u = norm3(d_u_r)
    n_f = norm3(d_f_r)
    if n_u == 0.0 or n_f == 0.0:
        raise ValueError("reference arm segment has zero length")

    swing_s = rot_from_to(model.d_u_h, d_u_r)
    S_u = n_u / model.upper_len

    a_r = cross3(d_u_r, d_f_r)
    flags = frozenset()
    if norm3(a_r) < DEGENERACY_EPS * n_u * n_f:
        R_s = swing_s
        flags = frozenset({DEGENERATE_ELBOW_AXIS})
    else:
        # rotate about d_u_r so the projected elbow axis meets a_r
        R_s = twist_from_to(swing_s.apply(model.a_h), a_r, d_u_r) * swing_s

    swing_e = rot_from_to(R_s.apply(model.d_f_h), d_f_r) * R_s
    S_f = n_f / model.fore_len
    R_w = refs.ee_rot

    # reactive forearm twist, a fraction of the wrist twist about the forearm
    twist_w = twist_from_to(swing_e.apply(model.w_vec), R_w.apply(model.w_vec), d_f_r)
    R_e = rotation_pow(twist_w, params.alpha_e) * swing_e
    return ArmPose(R_s, R_e, R_w, S_u, S_f, flags)


class OniaSolver:
    """Stateless adapter with the same ``solve`` interface as the iterative solvers."""

    name = "onia"

    def __init__(self, model: HumanArmModel, params: OniaParams = OniaParams()):
        self.model = model
        self.params = params

    def solve(self, refs: ArmRefs, model: HumanArmModel | None = None) -> ArmPose:
        return onia_solve(model or self.model, refs, self.params)

import math

import numpy as np
import pytest

from armalign.armmodel import default_model, fk_arm
from armalign.geom import Rotation, angle_between, project_perp, rot_from_to, swing_twist
from armalign.metrics import deviations
from armalign.onia import DEGENERATE_ELBOW_AXIS, OniaParams, OniaSolver, onia_solve
from armalign.session import ArmRefs, pose_catalog, therapy_trajectory

from conftest import random_refs


def elbow_axis_angle_after_twist(model, refs, pose, phi):
    """Angle between the elbow axis and the robot's after an extra twist ``phi`` about d_u_r."""
    d_u_r = refs.x_e_r - model.x_s_h
    a_r = np.cross(d_u_r, refs.x_w_r - refs.x_e_r)
    r = Rotation.from_axis_angle(d_u_r, phi) * pose.R_s
    return angle_between(r.apply(model.a_h), a_r)


def test_self_alignment_is_identity(right, left):
    for m in (right, left):
        # bend the default elbow slightly so the configuration is not straight
        refs = ArmRefs(m.default_elbow, m.default_elbow + m.d_f_h + np.array([0, 0, 1e-3]))
        pose = onia_solve(m, refs)
        assert pose.R_s.distance(Rotation()) < 1e-12
        assert pose.R_e.distance(Rotation()) < 1e-2
        assert abs(pose.S_u - 1.0) < 1e-15


def test_default_configuration_exactly():
    m = default_model("right")
    refs = ArmRefs(m.default_elbow, m.default_wrist)
    pose = onia_solve(m, refs)
    assert pose.R_s == Rotation() and pose.R_e == Rotation()
    # only rounding from differencing the reference positions
    assert abs(pose.S_u - 1.0) < 1e-15 and abs(pose.S_f - 1.0) < 1e-15
    assert DEGENERATE_ELBOW_AXIS in pose.flags


def test_t_pose_catalog_entry_gives_identity_swing(right):
    fr = pose_catalog()[6]
    pose = onia_solve(right, fr.right)
    swing, _ = swing_twist(pose.R_s, right.d_u_h)
    assert swing.distance(Rotation()) < 1e-15
    assert abs(pose.S_u - 0.27 / 0.25) < 1e-15
    assert abs(pose.S_f - 0.29 / 0.24) < 1e-15


def test_colinear_pose_is_flagged_and_exact(right):
    fr = pose_catalog()[1]
    pose = onia_solve(right, fr.right)
    assert DEGENERATE_ELBOW_AXIS in pose.flags
    dx_e, dx_w = deviations(right, pose, fr.right)
    assert dx_e < 1e-9 and dx_w < 1e-9


def test_random_references_reached_exactly(rng, right, left):
    worst = 0.0
    for i in range(10_000):
        m = right if i % 2 else left
        refs = random_refs(rng, m, min_sin=0.0)
        worst = max(worst, *deviations(m, onia_solve(m, refs), refs))
    assert worst < 1e-9


def test_stretch_is_not_clamped(right):
    refs = ArmRefs(right.x_s_h + [0, 0, 0.6], right.x_s_h + [0, 0.5, 0.6])
    pose = onia_solve(right, refs)
    assert pose.S_u == pytest.approx(2.4) and pose.S_f == pytest.approx(0.5 / 0.24)


def test_twist_beats_grid(rng, right):
    grid = np.linspace(-math.pi, math.pi, 3600, endpoint=False)
    for _ in range(50):
        refs = random_refs(rng, right)
        pose = onia_solve(right, refs)
        at_onia = elbow_axis_angle_after_twist(right, refs, pose, 0.0)
        best = min(elbow_axis_angle_after_twist(right, refs, pose, p) for p in grid)
        assert at_onia <= best + 1e-6


def test_projections_coincide(rng, right):
    for _ in range(500):
        refs = random_refs(rng, right)
        pose = onia_solve(right, refs)
        d_u_r = refs.x_e_r - right.x_s_h
        a_r = np.cross(d_u_r, refs.x_w_r - refs.x_e_r)
        p = project_perp(pose.R_s.apply(right.a_h), d_u_r)
        q = project_perp(a_r, d_u_r)
        cos = p @ q / (np.linalg.norm(p) * np.linalg.norm(q))
        assert cos > 1 - 1e-9


def test_reactive_twist_fraction(rng, right):
    refs = random_refs(rng, right)
    d_f_r = refs.x_w_r - refs.x_e_r
    base = onia_solve(right, refs, OniaParams(0.0))
    full = onia_solve(right, refs, OniaParams(1.0))
    part = onia_solve(right, refs, OniaParams(0.4))
    # all three differ only by a twist about the forearm
    for p in (full, part):
        rel = p.R_e * base.R_e.inverse()
        if rel.angle > 1e-12:
            assert abs(abs(rel.axis @ d_f_r) / np.linalg.norm(d_f_r) - 1.0) < 1e-9
    t_full = (full.R_e * base.R_e.inverse()).angle
    t_part = (part.R_e * base.R_e.inverse()).angle
    assert t_part == pytest.approx(0.4 * t_full, abs=1e-9)
    # with full reaction the wrist vector meets the end-effector's projection
    w1 = project_perp(full.R_e.apply(right.w_vec), d_f_r)
    w2 = project_perp(refs.ee_rot.apply(right.w_vec), d_f_r)
    assert angle_between(w1, w2) < 1e-7
    # reactive twist never moves the wrist
    np.testing.assert_allclose(fk_arm(right, part)[1], fk_arm(right, base)[1], atol=1e-15)


def test_alpha_zero_has_no_forearm_twist(rng, right):
    refs = random_refs(rng, right)
    pose = onia_solve(right, refs, OniaParams(0.0))
    swing_only = rot_from_to(pose.R_s.apply(right.d_f_h), refs.x_w_r - refs.x_e_r) * pose.R_s
    assert pose.R_e == swing_only


def test_alpha_validated():
    with pytest.raises(ValueError):
        OniaParams(1.5)


def test_end_effector_rotation_passed_through(rng, right):
    refs = random_refs(rng, right)
    assert onia_solve(right, refs).R_w == refs.ee_rot


def test_deterministic_and_stateless(rng, right, left):
    refs = [random_refs(rng, right) for _ in range(20)]
    first = [onia_solve(right, r) for r in refs]
    solver = OniaSolver(right)
    for r, p in zip(reversed(refs), reversed(first)):
        onia_solve(left, random_refs(rng, left))
        q = solver.solve(r)
        assert q.R_s.q == p.R_s.q and q.R_e.q == p.R_e.q and (q.S_u, q.S_f) == (p.S_u, p.S_f)


def test_zero_length_reference_rejected(right):
    with pytest.raises(ValueError):
        onia_solve(right, ArmRefs(right.x_s_h, right.default_wrist))


def test_therapy_exact(right):
    for fr in therapy_trajectory(2.0, 100.0):
        pose = onia_solve(right, fr.right)
        assert max(deviations(right, pose, fr.right)) < 1e-9

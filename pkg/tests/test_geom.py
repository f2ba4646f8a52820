import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation as SciRot

from armalign.geom import (E_X, E_Y, E_Z, Rotation, angle_between, exp_map, left_jacobian, log_map,
                           project_perp, rot_from_to, rotation_pow, signed_twist_angle, skew, slerp,
                           swing_twist, twist_from_to)

from conftest import random_rotation, unit


def sci(r: Rotation) -> SciRot:
    w, x, y, z = r.q
    return SciRot.from_quat([x, y, z, w])


# -- Rotation ---------------------------------------------------------------

def test_quaternion_is_canonical_and_unit(rng):
    for _ in range(200):
        r = Rotation.from_quat(rng.normal(size=4))
        assert r.q[0] >= 0.0
        assert abs(math.fsum(c * c for c in r.q) - 1.0) < 1e-15


def test_negated_quaternion_is_the_same_rotation():
    assert Rotation(0.5, 0.5, 0.5, 0.5) == Rotation(-0.5, -0.5, -0.5, -0.5)


def test_zero_quaternion_rejected():
    with pytest.raises(ValueError):
        Rotation(0.0, 0.0, 0.0, 0.0)


def test_apply_and_matrix_match_scipy(rng):
    for _ in range(100):
        r = random_rotation(rng)
        v = rng.normal(size=3)
        np.testing.assert_allclose(r.apply(v), sci(r).apply(v), atol=1e-14)
        np.testing.assert_allclose(r.as_matrix(), sci(r).as_matrix(), atol=1e-14)


def test_composition_applies_right_factor_first(rng):
    a, b = random_rotation(rng), random_rotation(rng)
    v = rng.normal(size=3)
    np.testing.assert_allclose((a * b).apply(v), a.apply(b.apply(v)), atol=1e-14)
    np.testing.assert_allclose((a * a.inverse()).q, Rotation.identity().q, atol=1e-15)


def test_batch_apply_matches_single(rng):
    r = random_rotation(rng)
    vs = rng.normal(size=(5, 3))
    np.testing.assert_allclose(r.apply(vs), np.array([r.apply(v) for v in vs]), atol=1e-14)


def test_from_matrix_round_trip(rng):
    for _ in range(100):
        r = random_rotation(rng)
        assert Rotation.from_matrix(r.as_matrix()).allclose(r, 1e-12)


def test_unit_quaternion_survives_serialisation_exactly(rng):
    for _ in range(100):
        r = random_rotation(rng)
        again = Rotation.from_quat([float(repr(c)) for c in r.q])
        assert again == r


# -- rot_from_to ------------------------------------------------------------

def test_rot_from_to_identical_is_identity():
    assert rot_from_to(E_X, E_X) == Rotation.identity()


def test_rot_from_to_x_to_y_is_quarter_turn_about_z():
    r = rot_from_to(E_X, E_Y)
    assert r.allclose(Rotation.from_axis_angle(E_Z, math.pi / 2), 1e-15)


def test_rot_from_to_antiparallel_uses_fixed_axis():
    r = rot_from_to(E_X, -E_X)
    assert abs(r.angle - math.pi) < 1e-15
    # cross(e_x, e_z) = -e_y
    np.testing.assert_allclose(abs(r.axis @ E_Y), 1.0, atol=1e-15)
    np.testing.assert_allclose(r.apply(E_X), -E_X, atol=1e-15)
    # vertical input falls back to cross(x, e_x)
    r = rot_from_to(E_Z, -E_Z)
    np.testing.assert_allclose(abs(r.axis @ E_Y), 1.0, atol=1e-15)
    assert rot_from_to(E_X, -E_X) == rot_from_to(E_X, -E_X)


def test_rot_from_to_random_pairs(rng):
    xs, ys = unit(rng, 10_000), unit(rng, 10_000)
    worst_map = worst_axis = 0.0
    for x, y in zip(xs, ys):
        r = rot_from_to(x, y)
        n = np.cross(x, y)
        n /= np.linalg.norm(n)
        worst_map = max(worst_map, np.linalg.norm(r.apply(x) - y))
        worst_axis = max(worst_axis, np.linalg.norm(r.apply(n) - n))
    assert worst_map < 1e-12
    assert worst_axis < 1e-12


def test_rot_from_to_is_the_minimal_rotation(rng):
    for _ in range(100):
        x, y = unit(rng), unit(rng)
        assert abs(rot_from_to(x, y).angle - math.acos(np.clip(x @ y, -1, 1))) < 1e-7


def test_rot_from_to_rejects_zero():
    with pytest.raises(ValueError):
        rot_from_to(np.zeros(3), E_X)


# -- projection, angles -----------------------------------------------------

def test_project_perp_examples():
    np.testing.assert_array_equal(project_perp(E_X, E_Y), E_X)
    np.testing.assert_array_equal(project_perp(E_Y, E_Y), np.zeros(3))
    np.testing.assert_array_equal(project_perp((1.0, 1.0, 0.0), E_Y), E_X)
    with pytest.raises(ValueError):
        project_perp(E_X, np.zeros(3))


def test_project_perp_orthogonal_and_idempotent(rng):
    for _ in range(1000):
        x, y = rng.normal(size=3), rng.normal(size=3)
        p = project_perp(x, y)
        assert abs(p @ y) <= 1e-14 * np.linalg.norm(x) * np.linalg.norm(y)
        np.testing.assert_allclose(project_perp(p, y), p, atol=1e-15)


def test_angle_between_examples():
    assert angle_between(E_X, E_X) == 0.0
    assert angle_between(E_X, -E_X) == math.pi
    assert angle_between(E_X, E_Y) == math.pi / 2


def test_twist_from_to_aligns_projections(rng):
    for _ in range(200):
        x, y, k = rng.normal(size=3), rng.normal(size=3), unit(rng)
        r = twist_from_to(x, y, k)
        np.testing.assert_allclose(r.apply(k), k, atol=1e-14)
        px, py = project_perp(r.apply(x), k), project_perp(y, k)
        assert np.linalg.norm(np.cross(px, py)) < 1e-12 * np.linalg.norm(px) * np.linalg.norm(py)
        assert px @ py > 0


# -- swing / twist ----------------------------------------------------------

def test_swing_twist_examples():
    s, t = swing_twist(Rotation.identity(), E_Z)
    assert s == Rotation.identity() and t == Rotation.identity()
    r = Rotation.from_axis_angle(E_Z, math.radians(30))
    s, t = swing_twist(r, E_Z)
    assert s.allclose(Rotation.identity(), 1e-15)
    assert t.allclose(r, 1e-15)
    assert abs(signed_twist_angle(t, E_Z) - math.radians(30)) < 1e-15


def test_swing_twist_recomposes(rng):
    worst = 0.0
    for _ in range(10_000):
        r, axis = random_rotation(rng), unit(rng)
        s, t = swing_twist(r, axis)
        worst = max(worst, (s * t).distance(r))
        # swing axis is perpendicular to the twist axis, twist axis parallel to it
        if s.angle > 1e-6:
            assert abs(s.axis @ axis) < 1e-9
        if t.angle > 1e-6:
            assert abs(abs(t.axis @ axis) - 1.0) < 1e-9
    assert worst < 1e-12


# -- powers, slerp ----------------------------------------------------------

def test_rotation_pow_examples(rng):
    r = random_rotation(rng)
    assert rotation_pow(r, 0.0) == Rotation.identity()
    assert rotation_pow(r, 1.0).allclose(r, 1e-14)
    half = rotation_pow(Rotation.from_axis_angle(E_Z, math.pi / 2), 0.5)
    assert half.allclose(Rotation.from_axis_angle(E_Z, math.pi / 4), 1e-15)


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_rotation_pow_adds_exponents(a, b, q):
    if sum(c * c for c in q) < 1e-6:
        return
    r = Rotation.from_quat(q)
    assert (rotation_pow(r, a) * rotation_pow(r, b)).distance(rotation_pow(r, a + b)) < 1e-10


def test_slerp_matches_scipy(rng):
    from scipy.spatial.transform import Slerp
    for _ in range(50):
        a, b = random_rotation(rng), random_rotation(rng)
        t = float(rng.uniform())
        ref = Slerp([0, 1], SciRot.concatenate([sci(a), sci(b)]))([t])[0]
        assert (sci(slerp(a, b, t)) * ref.inv()).magnitude() < 1e-10


# -- exponential map --------------------------------------------------------

def test_exp_map_examples():
    assert exp_map(np.zeros(3)) == Rotation.identity()
    assert exp_map((math.pi / 2, 0, 0)).allclose(Rotation.from_axis_angle(E_X, math.pi / 2), 1e-15)


def test_exp_matches_scipy_rotvec(rng):
    for _ in range(200):
        v = unit(rng) * rng.uniform(0, math.pi)
        assert (sci(exp_map(v)) * SciRot.from_rotvec(v).inv()).magnitude() < 1e-12


def test_exp_log_round_trip(rng):
    worst = 0.0
    for _ in range(2000):
        v = unit(rng) * rng.uniform(0, math.pi - 1e-3)
        worst = max(worst, np.linalg.norm(log_map(exp_map(v)) - v))
    assert worst < 1e-10


def test_exp_map_small_angle_branch_is_continuous():
    v = np.array([1e-9, -2e-9, 5e-10])
    w = np.array([1e-7, -2e-7, 5e-8])
    np.testing.assert_allclose(exp_map(v).apply(E_X), E_X + np.cross(v, E_X), atol=1e-17)
    np.testing.assert_allclose(exp_map(w).apply(E_X), SciRot.from_rotvec(w).apply(E_X), atol=1e-16)


def test_left_jacobian_is_derivative_of_exp(rng):
    h = 1e-6
    for _ in range(50):
        v = unit(rng) * rng.uniform(0.1, 2.5)
        y = rng.normal(size=3)
        r = exp_map(v)
        analytic = -skew(r.apply(y)) @ left_jacobian(v)
        fd = np.column_stack([(exp_map(v + h * e).apply(y) - exp_map(v - h * e).apply(y)) / (2 * h)
                              for e in np.eye(3)])
        np.testing.assert_allclose(analytic, fd, atol=1e-8)

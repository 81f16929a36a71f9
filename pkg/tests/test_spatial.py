import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_rotation
from vdcexo.spatial import (
    FrameMismatchError,
    FrameTransform,
    SpatialForce,
    SpatialVelocity,
    compose,
    force_cross,
    force_to_parent,
    identity_transform,
    is_rotation,
    make_transform,
    motion_cross,
    power,
    rotation_about,
    skew,
    velocity_to_child,
)

finite = st.floats(-10, 10, allow_nan=False)
vec3 = arrays(float, 3, elements=finite)
vec6 = arrays(float, 6, elements=finite)


def test_skew_zero_and_layout():
    assert np.array_equal(skew([0, 0, 0]), np.zeros((3, 3)))
    assert np.array_equal(skew([1, 2, 3]), [[0, -3, 2], [3, 0, -1], [-2, 1, 0]])


@given(vec3, vec3)
def test_skew_matches_cross(r, x):
    np.testing.assert_allclose(skew(r) @ x, np.cross(r, x), atol=1e-12)


def test_identity_transform_is_identity_matrix():
    assert np.array_equal(make_transform(np.eye(3), np.zeros(3)).U, np.eye(6))


def test_translation_lower_left_block():
    U = make_transform(np.eye(3), [1, 0, 0]).U
    np.testing.assert_array_equal(U[3:, :3], skew([1, 0, 0]))
    np.testing.assert_array_equal(U[:3, 3:], np.zeros((3, 3)))


def test_block_structure_elementwise(rng):
    for _ in range(50):
        R, r = random_rotation(rng), rng.normal(size=3)
        U = make_transform(R, r).U
        for a in range(3):
            for b in range(3):
                assert U[a, b] == R[a, b]
                assert U[3 + a, 3 + b] == R[a, b]
                assert U[a, 3 + b] == 0.0
                lower = sum(skew(r)[a, k] * R[k, b] for k in range(3))
                assert abs(U[3 + a, b] - lower) < 1e-14


def test_rejects_bad_rotation():
    with pytest.raises(ValueError):
        make_transform(2 * np.eye(3), np.zeros(3))
    with pytest.raises(ValueError):
        make_transform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(ValueError):
        make_transform(np.eye(3), [np.nan, 0, 0])


def test_velocity_identity_unchanged():
    v = SpatialVelocity([1, 2, 3, 4, 5, 6], "A")
    out = velocity_to_child(identity_transform(), v)
    assert out.frame == "B"
    np.testing.assert_array_equal(out.vector, v.vector)


def test_velocity_pure_rotation(rng):
    R = random_rotation(rng)
    v = SpatialVelocity(rng.normal(size=6), "A")
    out = velocity_to_child(make_transform(R, np.zeros(3)), v)
    np.testing.assert_allclose(out.angular, R.T @ v.angular, atol=1e-14)
    np.testing.assert_allclose(out.linear, R.T @ v.linear, atol=1e-14)


def test_velocity_pure_translation_lever_arm():
    r = np.array([0.0, 0.0, 1.0])
    w = np.array([1.0, 0.0, 0.0])
    out = velocity_to_child(make_transform(np.eye(3), r), SpatialVelocity.from_parts(
        np.zeros(3), w, "A"))
    # point at r on a body spinning about x through the parent origin
    np.testing.assert_allclose(out.linear, np.cross(w, r))
    np.testing.assert_allclose(out.angular, w)


def test_force_identity_and_translation():
    f = SpatialForce([1, 2, 3, 4, 5, 6], "B")
    np.testing.assert_array_equal(force_to_parent(identity_transform(), f).vector, f.vector)
    r = np.array([0.3, -0.2, 0.5])
    fv = np.array([1.0, 2.0, -1.0])
    out = force_to_parent(make_transform(np.eye(3), r), SpatialForce.from_parts(fv, np.zeros(3),
                                                                                "B"))
    np.testing.assert_allclose(out.moment, np.cross(r, fv), atol=1e-15)
    np.testing.assert_allclose(out.force, fv)


@given(vec6, vec6, vec3, st.integers(0, 2), st.floats(-np.pi, np.pi))
def test_power_duality(v, f, r, axis, angle):
    T = make_transform(rotation_about(axis, angle), r)
    vp = SpatialVelocity(v, "A")
    fc = SpatialForce(f, "B")
    lhs = power(vp, force_to_parent(T, fc))
    rhs = power(velocity_to_child(T, vp), fc)
    assert abs(lhs - rhs) <= 1e-9 * (1 + abs(lhs))


def test_compose_identity_inverse_and_associativity(rng):
    for _ in range(50):
        Ts = [make_transform(random_rotation(rng), rng.normal(size=3), p, c)
              for p, c in (("A", "B"), ("B", "C"), ("C", "D"))]
        Tab, Tbc, Tcd = Ts
        np.testing.assert_allclose(compose(Tab, identity_transform("B", "B")).U, Tab.U,
                                   atol=1e-15)
        np.testing.assert_allclose(compose(Tab, Tab.inverse()).U, np.eye(6), atol=1e-12)
        left = compose(compose(Tab, Tbc), Tcd).U
        right = compose(Tab, compose(Tbc, Tcd)).U
        np.testing.assert_allclose(left, right, atol=1e-12)
        np.testing.assert_allclose(left, Tab.U @ Tbc.U @ Tcd.U, atol=1e-12)


def test_frame_mismatch_errors():
    T = make_transform(np.eye(3), np.zeros(3), "A", "B")
    with pytest.raises(FrameMismatchError):
        velocity_to_child(T, SpatialVelocity(np.zeros(6), "B"))
    with pytest.raises(FrameMismatchError):
        force_to_parent(T, SpatialForce(np.zeros(6), "A"))
    with pytest.raises(FrameMismatchError):
        compose(T, make_transform(np.eye(3), np.zeros(3), "C", "D"))
    with pytest.raises(FrameMismatchError):
        power(SpatialVelocity(np.zeros(6), "A"), SpatialForce(np.zeros(6), "B"))


def test_spatial_vectors_validate_and_freeze():
    with pytest.raises(ValueError):
        SpatialVelocity([1, 2, 3], "A")
    with pytest.raises(ValueError):
        SpatialForce([np.inf, 0, 0, 0, 0, 0], "A")
    v = SpatialVelocity(np.zeros(6), "A")
    with pytest.raises(ValueError):
        v.vector[0] = 1.0


@given(vec6, vec6, vec6)
def test_cross_operators(V, X, Y):
    # motion cross of a vector with itself vanishes; force cross is its negative adjoint
    np.testing.assert_allclose(motion_cross(V) @ V, 0, atol=1e-9)
    np.testing.assert_allclose(X @ force_cross(V) @ Y, -(motion_cross(V) @ X) @ Y, atol=1e-8)


def test_rotation_helpers():
    for axis in range(3):
        R = rotation_about(axis, 0.7)
        assert is_rotation(R)
        e = np.zeros(3)
        e[axis] = 1
        np.testing.assert_allclose(R @ e, e)
    with pytest.raises(ValueError):
        rotation_about(3, 0.1)
    assert not is_rotation(np.ones((2, 2)))
    assert isinstance(make_transform(np.eye(3), np.zeros(3)).inverse(), FrameTransform)

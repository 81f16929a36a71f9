from dataclasses import replace

import numpy as np
import pytest

from vdcexo import _plant
from vdcexo.chain import (
    ChainGeometry,
    ChainState,
    backward_forces,
    backward_required_forces,
    body_gravity,
    forward_required_velocities,
    forward_velocities,
    gravity_direction_in_frame,
    jacobians,
    joint_loads,
    mechanical_energy,
    net_wrenches,
    plant_forward_dynamics,
    required_accelerations,
    world_poses,
)
from vdcexo.spatial import SpatialForce, SpatialVelocity, rotation_about


def rand_state(rng, n=7, scale=1.0):
    return ChainState(rng.uniform(-1.5, 1.5, n), scale * rng.normal(size=n))


def geometric_twists(geom, state):
    """Body twists from world-frame joint axes and origins (no recursion)."""
    RB, pB, _, _ = world_poses(geom, state.q)
    out = np.zeros((geom.n, 6))
    axes_w = np.array([RB[j][:, geom.axes[j]] for j in range(geom.n)])
    for k in range(geom.n):
        w = np.zeros(3)
        v = np.zeros(3)
        for j in range(k + 1):
            w += axes_w[j] * state.qdot[j]
            v += np.cross(axes_w[j], pB[k] - pB[j]) * state.qdot[j]
        out[k] = np.concatenate([RB[k].T @ v, RB[k].T @ w])
    return out


def numpy_jacobians(geom, q):
    J = np.zeros((geom.n, 6, geom.n))
    for j in range(geom.n):
        e = np.zeros(geom.n)
        e[j] = 1.0
        J[:, :, j] = forward_velocities(geom, ChainState(q, e)).body
    return J


def kinetic(geom, q, qdot):
    return mechanical_energy(geom, ChainState(q, qdot)) - mechanical_energy(
        geom, ChainState(q, np.zeros_like(q)))


def lagrangian_qdd(geom, state, tau, dist, tau_h):
    """Joint accelerations from energy derivatives alone (finite differences)."""
    n = geom.n
    q, qd = state.q, state.qdot
    eye = np.eye(n)

    def H_of(qq):
        K1 = np.array([kinetic(geom, qq, eye[i]) for i in range(n)])
        H = np.diag(2 * K1)
        for i in range(n):
            for j in range(i):
                H[i, j] = H[j, i] = kinetic(geom, qq, eye[i] + eye[j]) - K1[i] - K1[j]
        return H

    eps = 1e-6
    H = H_of(q)
    Hdot = (H_of(q + eps * qd) - H_of(q - eps * qd)) / (2 * eps)
    dK = np.array([(kinetic(geom, q + eps * eye[i], qd) - kinetic(geom, q - eps * eye[i], qd))
                   / (2 * eps) for i in range(n)])
    zero = np.zeros(n)
    dU = np.array([(mechanical_energy(geom, ChainState(q + eps * eye[i], zero))
                    - mechanical_energy(geom, ChainState(q - eps * eye[i], zero))) / (2 * eps)
                   for i in range(n)])
    J = numpy_jacobians(geom, q)
    gen_dist = np.einsum("kai,ka->i", J, dist)
    return np.linalg.solve(H, tau - tau_h - gen_dist - Hdot @ qd + dK - dU)


def test_zero_velocity(geom):
    st = ChainState(np.ones(7), np.zeros(7))
    assert not forward_velocities(geom, st).body.any()
    assert not forward_required_velocities(geom, st, np.zeros(7)).cut.any()


def test_first_joint_rate(geom):
    qd = np.zeros(7)
    qd[0] = 1.0
    v = forward_velocities(geom, ChainState(np.zeros(7), qd))
    assert v.at("B1").vector[5] == 1.0
    assert v.at("B1").frame == "B1"
    assert v.at("G").frame == "G"


def test_velocities_match_geometric_jacobian(geom, rng):
    for _ in range(50):
        st = rand_state(rng)
        np.testing.assert_allclose(forward_velocities(geom, st).body, geometric_twists(geom, st),
                                   atol=1e-12)


def test_jacobian_kernel_matches_superposition(geom, rng):
    for _ in range(20):
        q = rng.uniform(-2, 2, 7)
        np.testing.assert_allclose(jacobians(geom, q), numpy_jacobians(geom, q), atol=1e-13)


def test_required_velocities(geom, rng):
    st = rand_state(rng)
    np.testing.assert_allclose(forward_required_velocities(geom, st, st.qdot).body,
                               forward_velocities(geom, st).body, atol=0)
    a, b = rng.normal(size=(2, 7))
    lin = forward_required_velocities(geom, st, 2 * a - 3 * b).body
    np.testing.assert_allclose(lin, 2 * forward_required_velocities(geom, st, a).body
                               - 3 * forward_required_velocities(geom, st, b).body, atol=1e-12)


def test_required_accelerations_are_twist_derivatives(geom, rng):
    for _ in range(20):
        st = rand_state(rng)
        qdd = rng.normal(size=7)
        acc = required_accelerations(geom, st, st.qdot, qdd).body
        h = 1e-5

        def twist(t):
            return forward_velocities(geom, ChainState(st.q + st.qdot * t + 0.5 * qdd * t * t,
                                                       st.qdot + qdd * t)).body

        fd = (twist(h) - twist(-h)) / (2 * h)
        np.testing.assert_allclose(acc, fd, atol=1e-7)


def test_required_sweep_kernel(geom, rng):
    for _ in range(20):
        st = rand_state(rng)
        qdr, qddr = rng.normal(size=(2, 7))
        V, Vr, Ar, Rw = _plant.required_sweep(*geom.kernel_args(), st.q, st.qdot, qdr, qddr)
        np.testing.assert_allclose(V, forward_velocities(geom, st).body, atol=1e-13)
        np.testing.assert_allclose(Vr, forward_required_velocities(geom, st, qdr).body,
                                   atol=1e-13)
        np.testing.assert_allclose(Ar, required_accelerations(geom, st, qdr, qddr).body,
                                   atol=1e-12)
        np.testing.assert_allclose(Rw, world_poses(geom, st.q)[0], atol=1e-14)


def test_backward_zero_and_statics(geom, rng):
    st = rand_state(rng)
    assert not backward_forces(geom, st, np.zeros((7, 6))).cut.any()
    g = body_gravity(geom, st.q)
    for k in range(7):
        net = np.zeros((7, 6))
        phi = geom.phi[k]
        # holding body k still needs a wrench cancelling its weight
        net[k] = -np.concatenate([phi[0] * g[k], np.cross(phi[1:4], g[k])])
        base = backward_forces(geom, st, net).at("T0")
        np.testing.assert_allclose(base.force, [0, 0, phi[0] * 9.81], atol=1e-12)


def test_power_balance(geom, rng):
    for _ in range(30):
        st = rand_state(rng)
        vb = rng.normal(size=6)
        net = rng.normal(size=(7, 6))
        tip = rng.normal(size=6)
        vel = forward_velocities(geom, st, SpatialVelocity(vb, "T0"))
        F = backward_forces(geom, st, net, SpatialForce(tip, "T7"))
        lhs = np.einsum("ij,ij->", vel.body, net)
        rhs = (vel.cut[0] @ F.cut[0] - vel.cut[7] @ F.cut[7]
               + st.qdot @ joint_loads(geom, F))
        assert abs(lhs - rhs) < 1e-10 * (1 + abs(lhs))
        np.testing.assert_array_equal(backward_required_forces(geom, st, net, tip).body,
                                      backward_forces(geom, st, net, tip).body)


def test_force_and_inverse_sweep_kernels(geom, rng):
    for _ in range(20):
        st = rand_state(rng)
        net = rng.normal(size=(7, 6))
        tip = rng.normal(size=6)
        FB, FT = _plant.force_sweep(*geom.kernel_args(), st.q, net, tip)
        ref = backward_forces(geom, st, net, tip)
        np.testing.assert_allclose(FB, ref.body, atol=1e-12)
        np.testing.assert_allclose(FT, ref.cut[0], atol=1e-12)
        qdd = rng.normal(size=7)
        dist = rng.normal(size=(7, 6))
        net_k, FB_k = _plant.inverse_sweep(*geom.kernel_args(), geom.phi, st.q, st.qdot, qdd,
                                           dist, geom.g_world)
        net_ref = net_wrenches(geom, st, qdd, dist)
        np.testing.assert_allclose(net_k, net_ref, atol=1e-12)
        np.testing.assert_allclose(FB_k, backward_forces(geom, st, net_ref).body, atol=1e-12)


def test_inverse_forward_consistency(geom, rng):
    for _ in range(20):
        st = rand_state(rng)
        tau, tau_h = rng.normal(size=(2, 7))
        dist = rng.normal(size=(7, 6))
        qdd = plant_forward_dynamics(geom, st, tau, dist, tau_h)
        F = backward_forces(geom, st, net_wrenches(geom, st, qdd, dist))
        np.testing.assert_allclose(joint_loads(geom, F) + geom.joint_inertia * qdd, tau - tau_h,
                                   atol=1e-11)


def test_gravity_compensation_holds_still(geom, rng):
    st = ChainState(rng.uniform(-1, 1, 7), np.zeros(7))
    F = backward_forces(geom, st, net_wrenches(geom, st, np.zeros(7)))
    qdd = plant_forward_dynamics(geom, st, joint_loads(geom, F))
    np.testing.assert_allclose(qdd, 0, atol=1e-10)


def test_zero_gravity_rest(geom):
    g0 = replace(geom, gravity=0.0)
    assert not plant_forward_dynamics(g0, ChainState(np.ones(7), np.zeros(7)),
                                      np.zeros(7)).any()


def test_forward_dynamics_matches_lagrangian(geom, rng):
    for _ in range(5):
        st = rand_state(rng)
        tau, tau_h = rng.normal(size=(2, 7))
        dist = rng.normal(size=(7, 6))
        want = lagrangian_qdd(geom, st, tau, dist, tau_h)
        got = plant_forward_dynamics(geom, st, tau, dist, tau_h)
        np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-5)


def test_energy_conserved_without_input(geom, rng):
    q = rng.uniform(-1, 1, 7)
    qd = 0.5 * rng.normal(size=7)
    E0 = mechanical_energy(geom, ChainState(q, qd))
    z7, z76 = np.zeros(7), np.zeros((7, 6))
    worst = 0.0
    for _ in range(100):
        q, qd = _plant.rk4_steps(*geom.kernel_args(), geom.phi, geom.joint_inertia, q, qd, z7,
                                 z76, z7, geom.g_world, 0.00025, 400)
        worst = max(worst, abs(mechanical_energy(geom, ChainState(q, qd)) - E0))
    assert worst < 1e-3


def test_gravity_direction(geom, rng):
    st = ChainState(rng.uniform(-2, 2, 7), np.zeros(7))
    np.testing.assert_allclose(gravity_direction_in_frame(geom, st, "T0"), [0, 0, -9.81])
    np.testing.assert_allclose(gravity_direction_in_frame(geom, st, "G"), [0, 0, -9.81])
    for f in ("B1", "B4", "T5", "T7"):
        assert abs(np.linalg.norm(gravity_direction_in_frame(geom, st, f)) - 9.81) < 1e-12
    flipped = np.array(geom.joint_rotation)
    flipped[0] = rotation_about(0, np.pi)
    g2 = replace(geom, joint_rotation=flipped)
    np.testing.assert_allclose(gravity_direction_in_frame(g2, ChainState(np.zeros(7), np.zeros(7)),
                                                          "B1"), [0, 0, 9.81], atol=1e-12)
    with pytest.raises(KeyError):
        gravity_direction_in_frame(geom, st, "B0")
    with pytest.raises(KeyError):
        gravity_direction_in_frame(geom, st, "X3")


def test_validation(geom):
    with pytest.raises(ValueError):
        ChainState(np.array([np.nan] * 7), np.zeros(7))
    with pytest.raises(ValueError):
        replace(geom, axes=(0, 1, 2, 3, 0, 1, 2))
    with pytest.raises(ValueError):
        replace(geom, link_offset=np.zeros((6, 3)))
    bad = np.array(geom.joint_rotation)
    bad[2] = 2 * np.eye(3)
    with pytest.raises(ValueError):
        replace(geom, joint_rotation=bad)
    geom.check_physical()
    assert isinstance(geom, ChainGeometry)
    with pytest.raises(ValueError):
        forward_velocities(geom, ChainState(np.zeros(7), np.zeros(7)),
                           SpatialVelocity(np.zeros(6), "B1"))

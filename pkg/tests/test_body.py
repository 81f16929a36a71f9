import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import cloud_phi, cloud_wrench, point_cloud, random_phi
from vdcexo import _plant
from vdcexo.body import (
    NotPhysicalError,
    bregman,
    coeff_to_symmetric,
    coriolis_matrix,
    dynamics_terms,
    gravity_wrench,
    inertia_matrix,
    is_physical,
    mass_matrix,
    min_eig,
    params_from,
    phi_to_pseudo,
    pseudo_to_phi,
    regressor,
)
from vdcexo.spatial import SpatialVelocity


def test_pseudo_examples():
    phi = np.array([1, 0, 0, 0, 2, 2, 2, 0, 0, 0], dtype=float)
    np.testing.assert_array_equal(phi_to_pseudo(phi), np.eye(4))
    np.testing.assert_array_equal(pseudo_to_phi(np.eye(4)), phi)
    assert not phi_to_pseudo(np.zeros(10)).any()
    assert not pseudo_to_phi(np.zeros((4, 4))).any()


def test_pseudo_round_trip_random(rng):
    phis = rng.normal(size=(1000, 10))
    np.testing.assert_allclose(pseudo_to_phi(phi_to_pseudo(phis)), phis, rtol=0, atol=1e-12)
    A = rng.normal(size=(1000, 4, 4))
    L = A + np.swapaxes(A, -1, -2)
    np.testing.assert_allclose(phi_to_pseudo(pseudo_to_phi(L)), L, rtol=0, atol=1e-12)
    # single matrix path agrees with the batched path
    np.testing.assert_array_equal(pseudo_to_phi(L[3]), pseudo_to_phi(L)[3])


def test_pseudo_rejects_asymmetric():
    L = np.eye(4)
    L[0, 1] = 0.5
    with pytest.raises(ValueError):
        pseudo_to_phi(L)
    with pytest.raises(ValueError):
        pseudo_to_phi(L[None])
    with pytest.raises(ValueError):
        pseudo_to_phi(np.eye(3))


def test_coeff_to_symmetric_layout():
    assert not coeff_to_symmetric(np.zeros(10)).any()
    e1 = np.zeros(10)
    e1[0] = 1
    S = coeff_to_symmetric(e1)
    expected = np.zeros((4, 4))
    expected[3, 3] = 1
    np.testing.assert_array_equal(S, expected)
    with pytest.raises(ValueError):
        coeff_to_symmetric(np.zeros(9))


def test_trace_product_identity(rng):
    phi = rng.normal(size=(1000, 10))
    s = rng.normal(size=(1000, 10))
    lhs = np.einsum("ki,ki->k", phi, s)
    rhs = np.trace(phi_to_pseudo(phi) @ coeff_to_symmetric(s), axis1=-2, axis2=-1)
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12 * 10)
    # single-vector path agrees with the batched path
    np.testing.assert_array_equal(coeff_to_symmetric(s[0]), coeff_to_symmetric(s)[0])


def test_physical_consistency(rng):
    assert is_physical(random_phi(rng))
    # triangle inequality violated: Ixx > Iyy + Izz
    bad = np.array([1, 0, 0, 0, 3.0, 1.0, 1.0, 0, 0, 0])
    assert not is_physical(bad)
    assert not is_physical(np.array([-1, 0, 0, 0, 1, 1, 1, 0, 0, 0.0]))


def test_params_from_parallel_axis():
    phi = params_from(2.0, [0.1, 0, 0], np.diag([0.01, 0.02, 0.03]))
    np.testing.assert_allclose(phi, [2, 0.2, 0, 0, 0.01, 0.04, 0.05, 0, 0, 0])
    np.testing.assert_allclose(inertia_matrix(phi), np.diag([0.01, 0.04, 0.05]))


def test_bregman_values(rng):
    L = np.eye(4)
    assert abs(bregman(L, L)) < 1e-14
    assert abs(bregman(L, 2 * L) - (4 * np.log(2) + 2 - 4)) < 1e-12
    assert abs(bregman(L, 2 * L) - 0.772588) < 1e-6
    a = phi_to_pseudo(random_phi(rng, 500))
    b = phi_to_pseudo(random_phi(rng, 500))
    assert np.all(bregman(a, b) >= -1e-12)
    with pytest.raises(NotPhysicalError):
        bregman(L, -L)


def test_dynamics_terms_zero_velocity_and_point_mass(rng):
    phi = random_phi(rng)
    terms = dynamics_terms(phi, SpatialVelocity(np.zeros(6), "B1"), np.zeros(3))
    assert not terms.C.any()
    np.testing.assert_array_equal(terms.G, np.zeros(6))
    point = np.array([1.0, 0, 0, 0, 0, 0, 0, 0, 0, 0])
    M = mass_matrix(point)
    np.testing.assert_array_equal(M[:3, :3], np.eye(3))
    assert not M[3:].any() and not M[:, 3:].any()
    with pytest.raises(NotPhysicalError):
        dynamics_terms(np.array([1, 0, 0, 0, 3.0, 1, 1, 0, 0, 0]), np.zeros(6), np.zeros(3))


def test_newton_euler_point_cloud(rng):
    for _ in range(200):
        m, p = point_cloud(rng)
        phi = cloud_phi(m, p)
        V, A, g = rng.normal(size=6), rng.normal(size=6), rng.normal(size=3)
        want = cloud_wrench(m, p, V, A, g)
        got = mass_matrix(phi) @ A + coriolis_matrix(phi, V) @ V + gravity_wrench(phi, g)
        np.testing.assert_allclose(got, want, rtol=1e-10, atol=1e-12)
        # regressor with required = actual quantities is the free-body net wrench
        np.testing.assert_allclose(regressor(V, V, A, g) @ phi, want, rtol=1e-10, atol=1e-12)


def test_coriolis_is_skew(rng):
    for _ in range(100):
        C = coriolis_matrix(random_phi(rng), rng.normal(size=6))
        np.testing.assert_allclose(C, -C.T, atol=1e-12)


def test_regressor_zero():
    assert not regressor(np.zeros(6), np.zeros(6), np.zeros(6), np.zeros(3)).any()


def test_regressor_columns_against_matrix_form(rng):
    n = 1000
    V, Vr, A = rng.normal(size=(3, n, 6))
    g = rng.normal(size=(n, 3))
    Y = regressor(V, Vr, A, g)
    basis = np.eye(10)
    for k in range(0, n, 50):
        for e in basis:
            want = mass_matrix(e) @ A[k] + coriolis_matrix(e, V[k]) @ Vr[k] + gravity_wrench(e, g[k])
            np.testing.assert_allclose(Y[k] @ e, want, rtol=1e-10, atol=1e-12)
    np.testing.assert_array_equal(_plant.regressor_batch(V, Vr, A, g).shape, Y.shape)
    np.testing.assert_allclose(_plant.regressor_batch(V, Vr, A, g), Y, rtol=0, atol=1e-12)


@given(st.floats(0.05, 5), st.floats(0.01, 2))
def test_energy_rate_of_free_body(mass, force_scale):
    rng = np.random.default_rng(int(mass * 1000))
    phi = random_phi(rng)
    phi[0] = mass
    if not is_physical(phi):
        return
    M = mass_matrix(phi)
    g = np.array([0, 0, -9.81])
    F = force_scale * rng.normal(size=6)
    G = gravity_wrench(phi, g)

    def f(V):
        return np.linalg.solve(M, F - coriolis_matrix(phi, V) @ V - G)

    V = rng.normal(size=6)
    h = 1e-4
    work = 0.0
    E0 = 0.5 * V @ M @ V
    for _ in range(200):
        p0 = V @ (F - G)
        k1 = f(V)
        k2 = f(V + 0.5 * h * k1)
        k3 = f(V + 0.5 * h * k2)
        k4 = f(V + h * k3)
        V = V + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        work += 0.5 * h * (p0 + V @ (F - G))
    E1 = 0.5 * V @ M @ V
    assert abs((E1 - E0) - work) < 1e-6 * (1 + abs(work))


def test_min_eig_batched(rng):
    L = phi_to_pseudo(random_phi(rng, 20))
    assert min_eig(L).shape == (20,)
    assert np.all(min_eig(L) > 0)

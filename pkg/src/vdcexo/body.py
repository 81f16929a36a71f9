"""Single rigid body: inertial parameters, pseudo-inertia, dynamics, regressor.

Inertial parameter layout (10-vector, all quantities in the body frame)::

    phi = [m, hx, hy, hz, Ixx, Iyy, Izz, Ixy, Iyz, Ixz]

with ``h = m * c`` the first mass moment and ``I`` the rotational inertia
about the frame origin.  Dynamics follow ``M dV/dt + C(V) V + G = F*`` with
``V = [v, w]`` and ``F* = [f, m]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _plant
from .spatial import SpatialVelocity, force_cross, motion_cross, skew

SYM_TOL = 1e-10


class NotPhysicalError(ValueError):
    """Pseudo-inertia is not positive definite."""


def _phi(phi):
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] != 10:
        raise ValueError(f"inertial parameter vector must have 10 entries, got {phi.shape}")
    return phi


def inertia_matrix(phi):
    """3x3 rotational inertia from a parameter vector (batched over leading dims)."""
    phi = _phi(phi)
    Ixx, Iyy, Izz, Ixy, Iyz, Ixz = (phi[..., k] for k in range(4, 10))
    I = np.empty(phi.shape[:-1] + (3, 3))
    I[..., 0, 0], I[..., 1, 1], I[..., 2, 2] = Ixx, Iyy, Izz
    I[..., 0, 1] = I[..., 1, 0] = Ixy
    I[..., 1, 2] = I[..., 2, 1] = Iyz
    I[..., 0, 2] = I[..., 2, 0] = Ixz
    return I


def params_from(mass, com, inertia_com):
    """Parameter vector from mass, centre of mass and inertia about the COM."""
    c = np.asarray(com, dtype=float)
    Ic = np.asarray(inertia_com, dtype=float)
    # parallel axis theorem to move inertia to the frame origin
    I = Ic + mass * (c @ c * np.eye(3) - np.outer(c, c))
    h = mass * c
    return np.array([mass, *h, I[0, 0], I[1, 1], I[2, 2], I[0, 1], I[1, 2], I[0, 2]])


def phi_to_pseudo(phi):
    phi = _phi(phi)
    I = inertia_matrix(phi)
    tr = np.trace(I, axis1=-2, axis2=-1)
    L = np.zeros(phi.shape[:-1] + (4, 4))
    L[..., :3, :3] = 0.5 * tr[..., None, None] * np.eye(3) - I
    L[..., :3, 3] = phi[..., 1:4]
    L[..., 3, :3] = phi[..., 1:4]
    L[..., 3, 3] = phi[..., 0]
    return L


def pseudo_to_phi(L):
    L = np.asarray(L, dtype=float)
    if L.shape[-2:] != (4, 4):
        raise ValueError(f"pseudo-inertia must be 4x4, got {L.shape}")
    if L.ndim == 3:
        return _plant.pseudo_to_phi_batch(np.ascontiguousarray(L), SYM_TOL)
    asym = np.abs(L - np.swapaxes(L, -1, -2)).max()
    if asym > SYM_TOL * max(1.0, np.abs(L).max()):
        raise ValueError("pseudo-inertia is not symmetric")
    # rotational inertia is trace(Sigma) * I - Sigma for the upper-left block Sigma
    sxx, syy, szz = L[..., 0, 0], L[..., 1, 1], L[..., 2, 2]
    return np.stack([L[..., 3, 3], L[..., 0, 3], L[..., 1, 3], L[..., 2, 3],
                     syy + szz, sxx + szz, sxx + syy,
                     -L[..., 0, 1], -L[..., 1, 2], -L[..., 0, 2]], axis=-1)


def coeff_to_symmetric(s):
    """Symmetric S(s) with ``phi @ s == trace(phi_to_pseudo(phi) @ S(s))``."""
    s = np.asarray(s, dtype=float)
    if s.shape[-1] != 10:
        raise ValueError(f"coefficient vector must have 10 entries, got {s.shape}")
    if s.ndim == 2:
        return _plant.coeff_to_symmetric_batch(np.ascontiguousarray(s))
    s1, s2, s3, s4, s5, s6, s7, s8, s9, s10 = (s[..., k] for k in range(10))
    S = np.empty(s.shape[:-1] + (4, 4))
    S[..., 0, 0] = s6 + s7
    S[..., 1, 1] = s5 + s7
    S[..., 2, 2] = s5 + s6
    S[..., 3, 3] = s1
    S[..., 0, 1] = S[..., 1, 0] = -0.5 * s8
    S[..., 0, 2] = S[..., 2, 0] = -0.5 * s10
    S[..., 1, 2] = S[..., 2, 1] = -0.5 * s9
    S[..., 0, 3] = S[..., 3, 0] = 0.5 * s2
    S[..., 1, 3] = S[..., 3, 1] = 0.5 * s3
    S[..., 2, 3] = S[..., 3, 2] = 0.5 * s4
    return S


def min_eig(L):
    return np.linalg.eigvalsh(L)[..., 0]


def is_physical(phi):
    return bool(np.all(min_eig(phi_to_pseudo(phi)) > 0.0))


def bregman(L_true, L_est):
    """``log(|L_est|/|L_true|) + tr(L_est^-1 L_true) - 4`` for PD 4x4 matrices.

    Batched over leading dimensions.
    """
    L_true = np.asarray(L_true, dtype=float)
    L_est = np.asarray(L_est, dtype=float)
    sign_t, logdet_t = np.linalg.slogdet(L_true)
    sign_e, logdet_e = np.linalg.slogdet(L_est)
    if np.any(min_eig(L_true) <= 0) or np.any(min_eig(L_est) <= 0):
        raise NotPhysicalError("Bregman divergence needs positive definite arguments")
    tr = np.trace(np.linalg.solve(L_est, L_true), axis1=-2, axis2=-1)
    return logdet_e - logdet_t + tr - 4.0


@dataclass(frozen=True)
class BodyDynTerms:
    M: np.ndarray
    C: np.ndarray
    G: np.ndarray


def mass_matrix(phi):
    phi = _phi(phi)
    M = np.zeros((6, 6))
    M[:3, :3] = phi[0] * np.eye(3)
    sh = skew(phi[1:4])
    M[:3, 3:] = -sh
    M[3:, :3] = sh
    M[3:, 3:] = inertia_matrix(phi)
    return M


def gravity_wrench(phi, g):
    """Gravity term ``G`` (moved to the left-hand side of the dynamics)."""
    phi = _phi(phi)
    g = np.asarray(g, dtype=float)
    return -np.concatenate([phi[0] * g, np.cross(phi[1:4], g)])


def coriolis_matrix(phi, V):
    """Skew-symmetric factorisation ``C(V) = crf(V) M + M crm(V)``.

    ``C(V) V`` equals the Newton-Euler bias ``V x* (M V)``.
    """
    M = mass_matrix(phi)
    return force_cross(V) @ M + M @ motion_cross(V)


def dynamics_terms(phi, v, gravity_in_frame):
    phi = _phi(phi)
    if not is_physical(phi):
        raise NotPhysicalError("inertial parameters are not physically consistent")
    V = v.vector if isinstance(v, SpatialVelocity) else np.asarray(v, dtype=float)
    return BodyDynTerms(mass_matrix(phi), coriolis_matrix(phi, V),
                        gravity_wrench(phi, gravity_in_frame))


def _inertia_map(x):
    """``L(x)`` with ``I @ x == L(x) @ [Ixx, Iyy, Izz, Ixy, Iyz, Ixz]`` (batched)."""
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    z = np.zeros_like(x1)
    return np.stack([
        np.stack([x1, z, z, x2, z, x3], axis=-1),
        np.stack([z, x2, z, x1, x3, z], axis=-1),
        np.stack([z, z, x3, z, x2, x1], axis=-1),
    ], axis=-2)


def _skew_batch(r):
    z = np.zeros_like(r[..., 0])
    return np.stack([
        np.stack([z, -r[..., 2], r[..., 1]], axis=-1),
        np.stack([r[..., 2], z, -r[..., 0]], axis=-1),
        np.stack([-r[..., 1], r[..., 0], z], axis=-1),
    ], axis=-2)


def regressor(v, v_r, a_r, gravity_in_frame):
    """6x10 matrix ``Y`` with ``Y phi = M a_r + C(v) v_r + G`` for every phi.

    All arguments may carry matching leading batch dimensions.
    """
    V = v.vector if isinstance(v, SpatialVelocity) else np.asarray(v, dtype=float)
    Vr = v_r.vector if isinstance(v_r, SpatialVelocity) else np.asarray(v_r, dtype=float)
    A = np.asarray(a_r, dtype=float)
    g = np.asarray(gravity_in_frame, dtype=float)
    lin, ang = V[..., :3], V[..., 3:]
    lin_r, ang_r = Vr[..., :3], Vr[..., 3:]
    # b = a_r + V x V_r
    b_lin = A[..., :3] + np.cross(ang, lin_r) + np.cross(lin, ang_r)
    b_ang = A[..., 3:] + np.cross(ang, ang_r)

    sw, sv = _skew_batch(ang), _skew_batch(lin)
    swr, svr = _skew_batch(ang_r), _skew_batch(lin_r)
    shape = np.broadcast_shapes(V.shape[:-1], Vr.shape[:-1], A.shape[:-1], g.shape[:-1])
    Y = np.zeros(shape + (6, 10))
    Y[..., :3, 0] = b_lin + np.cross(ang, lin_r) - g
    Y[..., 3:, 0] = np.cross(lin, lin_r)
    Y[..., :3, 1:4] = _skew_batch(b_ang) + sw @ swr
    Y[..., 3:, 1:4] = -_skew_batch(b_lin) + _skew_batch(g) - sw @ svr + sv @ swr
    Y[..., 3:, 4:] = _inertia_map(b_ang) + sw @ _inertia_map(ang_r)
    return Y

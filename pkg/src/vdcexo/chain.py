"""Serial chain of rigid bodies decomposed at virtual cutting points.

Frames: ``T0`` is the fixed ground, joint ``i`` connects ``T{i-1}`` to body
frame ``B{i}`` (rotation about the joint axis applied after a fixed
rotation/offset) and ``B{i} -> T{i}`` is a fixed link transform.  Joint
numbering in frame names is 1-based; array indices are 0-based.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _plant
from .body import coriolis_matrix, gravity_wrench, is_physical, mass_matrix
from .spatial import (
    SpatialForce,
    SpatialVelocity,
    is_rotation,
    motion_cross,
    rotation_about,
    transform_matrix,
)

GRAVITY = 9.81
G_WORLD = np.array([0.0, 0.0, -GRAVITY])

AXIS_NAMES = {"x": 0, "y": 1, "z": 2}
DEFAULT_AXES = (2, 2, 2, 2, 0, 2, 1)


def axis_selector(axis):
    mu = np.zeros(6)
    mu[3 + axis] = 1.0
    return mu


@dataclass(frozen=True, eq=False)
class ChainGeometry:
    """Kinematic and inertial description of the augmented chain."""

    axes: tuple
    joint_rotation: np.ndarray
    joint_offset: np.ndarray
    link_rotation: np.ndarray
    link_offset: np.ndarray
    robot_phi: np.ndarray
    human_phi: np.ndarray
    motor_inertia: np.ndarray
    human_inertia: np.ndarray
    gravity: float = GRAVITY
    link_U: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.axes)
        conv = {
            "joint_rotation": (n, 3, 3), "joint_offset": (n, 3),
            "link_rotation": (n, 3, 3), "link_offset": (n, 3),
            "robot_phi": (n, 10), "human_phi": (n, 10),
            "motor_inertia": (n,), "human_inertia": (n,),
        }
        for name, shape in conv.items():
            a = np.array(getattr(self, name), dtype=float)
            if a.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {a.shape}")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "axes", tuple(int(a) for a in self.axes))
        if any(a not in (0, 1, 2) for a in self.axes):
            raise ValueError(f"joint axes must be 0/1/2, got {self.axes}")
        for i in range(n):
            if not (is_rotation(self.joint_rotation[i]) and is_rotation(self.link_rotation[i])):
                raise ValueError(f"joint {i + 1}: fixed rotation is not orthonormal")
        U = np.array([transform_matrix(self.link_rotation[i], self.link_offset[i])
                      for i in range(n)])
        U.setflags(write=False)
        object.__setattr__(self, "link_U", U)

    @property
    def n(self):
        return len(self.axes)

    @property
    def g_world(self):
        return np.array([0.0, 0.0, -self.gravity])

    @property
    def mu(self):
        return np.array([axis_selector(a) for a in self.axes])

    @property
    def phi(self):
        """Augmented (robot + human) inertial parameters per body."""
        return self.robot_phi + self.human_phi

    @property
    def joint_inertia(self):
        return self.motor_inertia + self.human_inertia

    def check_physical(self):
        bad = [i + 1 for i in range(self.n)
               if not (is_physical(self.robot_phi[i]) and is_physical(self.human_phi[i]))]
        if bad:
            raise ValueError(f"bodies {bad} have non-physical inertial parameters")

    def kernel_args(self):
        return (np.asarray(self.axes, dtype=np.int64), self.joint_rotation,
                self.joint_offset, self.link_rotation, self.link_offset)


@dataclass
class ChainState:
    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.qdot = np.asarray(self.qdot, dtype=float)
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.qdot))):
            raise ValueError("chain state must be finite")


@dataclass(frozen=True)
class ChainVelocities:
    """``body[i]`` is the twist of ``B{i+1}``; ``cut[k]`` that of ``T{k}``."""

    body: np.ndarray
    cut: np.ndarray

    def at(self, frame):
        kind, k = _parse_frame(frame, len(self.body))
        vec = self.body[k - 1] if kind == "B" else self.cut[k]
        return SpatialVelocity(vec, frame)


@dataclass(frozen=True)
class ChainForces:
    """``body[i]`` is the wrench at ``B{i+1}``; ``cut[k]`` the wrench at ``T{k}``."""

    body: np.ndarray
    cut: np.ndarray

    def at(self, frame):
        kind, k = _parse_frame(frame, len(self.body))
        vec = self.body[k - 1] if kind == "B" else self.cut[k]
        return SpatialForce(vec, frame)


def _parse_frame(frame, n):
    if frame == "G":
        return "T", 0
    if len(frame) < 2 or frame[0] not in "BT" or not frame[1:].isdigit():
        raise KeyError(f"unknown frame {frame!r}")
    kind, k = frame[0], int(frame[1:])
    lo = 1 if kind == "B" else 0
    if not lo <= k <= n:
        raise KeyError(f"unknown frame {frame!r}")
    return kind, k


def joint_U(geom, q):
    """``U`` matrices of the joint transforms ``T{i-1} -> B{i}`` at angles ``q``."""
    return np.array([
        transform_matrix(geom.joint_rotation[i] @ rotation_about(geom.axes[i], q[i]),
                         geom.joint_offset[i])
        for i in range(geom.n)
    ])


def _propagate(geom, q, rates, v_base):
    Uj = joint_U(geom, q)
    mu = geom.mu
    body = np.zeros((geom.n, 6))
    cut = np.zeros((geom.n + 1, 6))
    cut[0] = v_base
    for i in range(geom.n):
        body[i] = Uj[i].T @ cut[i] + mu[i] * rates[i]
        cut[i + 1] = geom.link_U[i].T @ body[i]
    return ChainVelocities(body, cut)


def _base(v):
    if v is None:
        return np.zeros(6)
    if isinstance(v, SpatialVelocity):
        if v.frame not in ("T0", "G"):
            raise ValueError(f"base velocity must be in T0, got {v.frame!r}")
        return v.vector
    return np.asarray(v, dtype=float)


def forward_velocities(geom, state, v_base=None):
    return _propagate(geom, state.q, state.qdot, _base(v_base))


def forward_required_velocities(geom, state, qdot_r, v_base_r=None):
    return _propagate(geom, state.q, np.asarray(qdot_r, dtype=float), _base(v_base_r))


def required_accelerations(geom, state, qdot_r, qddot_r, v_base_r=None, a_base_r=None):
    """Time derivatives of the required twists of every frame.

    The joint transforms rotate at the measured rates ``state.qdot``, so the
    derivative of ``U^T V_r`` contributes ``(U^T V_r) x (mu qdot)``.
    """
    Uj = joint_U(geom, state.q)
    mu = geom.mu
    n = geom.n
    vr = np.zeros((n + 1, 6))
    ar = np.zeros((n + 1, 6))
    vr[0] = _base(v_base_r)
    ar[0] = _base(a_base_r)
    body = np.zeros((n, 6))
    for i in range(n):
        vin = Uj[i].T @ vr[i]
        body[i] = Uj[i].T @ ar[i] + mu[i] * qddot_r[i] + motion_cross(vin) @ (mu[i] * state.qdot[i])
        vr[i + 1] = geom.link_U[i].T @ (vin + mu[i] * qdot_r[i])
        ar[i + 1] = geom.link_U[i].T @ body[i]
    return ChainVelocities(body, ar)


def _sweep_back(geom, q, net, f_tip):
    Uj = joint_U(geom, q)
    n = geom.n
    body = np.zeros((n, 6))
    cut = np.zeros((n + 1, 6))
    cut[n] = f_tip
    for j in range(n - 1, -1, -1):
        body[j] = geom.link_U[j] @ cut[j + 1] + net[j]
        cut[j] = Uj[j] @ body[j]
    return ChainForces(body, cut)


def _tip(f, n):
    if f is None:
        return np.zeros(6)
    if isinstance(f, SpatialForce):
        if f.frame != f"T{n}":
            raise ValueError(f"tip wrench must be in T{n}, got {f.frame!r}")
        return f.vector
    return np.asarray(f, dtype=float)


def backward_forces(geom, state, net_wrenches, f_tip=None):
    """Wrenches at every frame from the bodies' net wrenches and the tip wrench."""
    net = np.asarray(net_wrenches, dtype=float).reshape(geom.n, 6)
    return _sweep_back(geom, state.q, net, _tip(f_tip, geom.n))


def backward_required_forces(geom, state, net_required, f_tip_r=None):
    return backward_forces(geom, state, net_required, f_tip_r)


def joint_loads(geom, forces):
    """Projection ``mu_i^T F_{B_i}`` of body wrenches onto the joint axes."""
    return np.einsum("ij,ij->i", geom.mu, forces.body)


def world_poses(geom, q):
    """World rotation and origin of every ``B_i`` and ``T_i``."""
    n = geom.n
    RB, pB = np.zeros((n, 3, 3)), np.zeros((n, 3))
    RT, pT = np.zeros((n + 1, 3, 3)), np.zeros((n + 1, 3))
    RT[0] = np.eye(3)
    for i in range(n):
        pB[i] = pT[i] + RT[i] @ geom.joint_offset[i]
        RB[i] = RT[i] @ geom.joint_rotation[i] @ rotation_about(geom.axes[i], q[i])
        pT[i + 1] = pB[i] + RB[i] @ geom.link_offset[i]
        RT[i + 1] = RB[i] @ geom.link_rotation[i]
    return RB, pB, RT, pT


def gravity_direction_in_frame(geom, state, frame):
    kind, k = _parse_frame(frame, geom.n)
    RB, _, RT, _ = world_poses(geom, state.q)
    R = RB[k - 1] if kind == "B" else RT[k]
    return R.T @ geom.g_world


def body_gravity(geom, q):
    RB = world_poses(geom, q)[0]
    return np.einsum("kji,j->ki", RB, geom.g_world)


def jacobians(geom, q):
    """Body Jacobians ``J (n, 6, n)`` with ``V_{B_k} = J[k] @ qdot``."""
    _, _, J, _ = _plant.kinematics(*geom.kernel_args(), np.asarray(q, dtype=float),
                                   np.zeros(geom.n))
    return J


def plant_forward_dynamics(geom, state, tau_applied, dist=None, tau_h=None):
    """Joint accelerations of the augmented chain.

    ``dist[i]`` is the disturbance wrench ``F_d`` of body ``i`` in its own
    frame; it resists motion, i.e. the joints must supply it in addition to
    the rigid-body wrench.
    """
    n = geom.n
    dist = np.zeros((n, 6)) if dist is None else np.asarray(dist, dtype=float).reshape(n, 6)
    tau_h = np.zeros(n) if tau_h is None else np.asarray(tau_h, dtype=float)
    qdd = _plant.forward_dynamics(*geom.kernel_args(), geom.phi, geom.joint_inertia,
                                  state.q, state.qdot, np.asarray(tau_applied, dtype=float),
                                  dist, tau_h, geom.g_world)
    if not np.all(np.isfinite(qdd)):
        raise FloatingPointError("joint-space inertia is singular")
    return qdd


def joint_space_terms(geom, q, qdot):
    """Joint-space inertia ``H`` and Coriolis matrix ``Cq`` with ``Hdot - 2 Cq`` skew.

    ``Cq = sum_k J_k^T (M_k Jdot_k + C_k(V_k) J_k)`` using the skew body
    factorisation; ``Jdot`` comes from a central difference of ``J`` along
    ``qdot``.
    """
    J = jacobians(geom, q)
    eps = 1e-6
    Jdot = (jacobians(geom, q + eps * qdot) - jacobians(geom, q - eps * qdot)) / (2 * eps)
    H = np.diag(geom.joint_inertia).astype(float)
    Cq = np.zeros((geom.n, geom.n))
    for k in range(geom.n):
        M = mass_matrix(geom.phi[k])
        V = J[k] @ qdot
        H += J[k].T @ M @ J[k]
        Cq += J[k].T @ (M @ Jdot[k] + coriolis_matrix(geom.phi[k], V) @ J[k])
    return H, Cq


def mechanical_energy(geom, state):
    """Kinetic plus gravitational potential energy of the augmented chain."""
    vel = forward_velocities(geom, state)
    RB, pB, _, _ = world_poses(geom, state.q)
    phi = geom.phi
    kinetic = 0.5 * float(np.sum(geom.joint_inertia * state.qdot ** 2))
    potential = 0.0
    for k in range(geom.n):
        kinetic += 0.5 * vel.body[k] @ mass_matrix(phi[k]) @ vel.body[k]
        first_moment = phi[k, 0] * pB[k] + RB[k] @ phi[k, 1:4]
        potential -= geom.g_world @ first_moment
    return kinetic + potential


def net_wrenches(geom, state, qddot, dist=None):
    """Actual net wrench on every body for given joint accelerations."""
    n = geom.n
    vel = forward_velocities(geom, state)
    acc = required_accelerations(geom, state, state.qdot, qddot)
    g = body_gravity(geom, state.q)
    out = np.zeros((n, 6))
    for k in range(n):
        phi = geom.phi[k]
        out[k] = (mass_matrix(phi) @ acc.body[k]
                  + coriolis_matrix(phi, vel.body[k]) @ vel.body[k]
                  + gravity_wrench(phi, g[k]))
    if dist is not None:
        out += np.asarray(dist, dtype=float).reshape(n, 6)
    return out

"""Decentralized joint-space controller built from per-body and per-joint laws.

One control evaluation runs a forward sweep (required twists and their
derivatives), computes a required net wrench per body, sweeps backwards to
get the load each joint must carry, adds the joint-level law and returns
the torque before actuator limits.  Estimator updates are a separate step
so the same evaluation serves both sampled and continuous-time runs.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _plant
from .body import coeff_to_symmetric, pseudo_to_phi
from .estimator import (
    EstimatorState,
    body_nal_matrix,
    joint_inertia_estimate,
    joint_regressor,
    nal_step,
    nn_estimate,
    update_body_net,
    update_joint_net,
)

N_JOINTS = 7


class BarrierBreach(RuntimeError):
    """Required-angle error reached the barrier half-width."""

    def __init__(self, joint, e_a, k_b, t=None):
        self.joint, self.e_a, self.k_b, self.t = joint, e_a, k_b, t
        where = "" if t is None else f" at t={t:.6f}"
        super().__init__(f"barrier breach{where}: joint {joint + 1} |e_a|={abs(e_a):.6g} rad "
                         f">= k_b={k_b:.6g} rad")


def _vec(x, n=N_JOINTS):
    return np.broadcast_to(np.asarray(x, dtype=float), (n,)).copy()


def _mat6(x, n=N_JOINTS):
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = a * np.eye(6)
    elif a.shape == (6,):
        a = np.diag(a)
    return np.broadcast_to(a, (n, 6, 6)).copy()


@dataclass
class ControlGains:
    """Controller gains; scalars broadcast to every joint/body."""

    lam: np.ndarray = 5.0
    K_D: np.ndarray = 3.0
    K_I: np.ndarray = 5.0
    Gamma: float = 10.0
    gamma1: float = 10.0
    gamma2: np.ndarray = 10.0
    k_d: np.ndarray = 1.5
    k_I: np.ndarray = 5.0
    zeta: float = 10.0
    beta1: np.ndarray = 10.0
    beta2: np.ndarray = 10.0
    k_b: np.ndarray = np.deg2rad(3.0)
    k_p: np.ndarray = 100.0
    k_v: np.ndarray = 15.0
    n: int = N_JOINTS

    def __post_init__(self):
        n = self.n
        for name in ("lam", "gamma2", "k_d", "k_I", "beta1", "beta2", "k_b", "k_p", "k_v"):
            setattr(self, name, _vec(getattr(self, name), n))
        self.K_D = _mat6(self.K_D, n)
        self.K_I = _mat6(self.K_I, n)
        G = np.asarray(self.Gamma, dtype=float)
        self.Gamma = float(G) if G.ndim == 0 else G
        problems = []
        for name in ("lam", "gamma2", "k_d", "k_I", "beta1", "beta2", "k_b", "k_p", "k_v"):
            if np.any(getattr(self, name) < 0):
                problems.append(f"{name} must be non-negative")
        if np.any(self.k_b <= 0):
            problems.append("k_b must be positive")
        if not (self.gamma1 > 0 and self.zeta > 0):
            problems.append("gamma1 and zeta must be positive")
        for name in ("K_D", "K_I"):
            K = getattr(self, name)
            if np.any(np.linalg.eigvalsh(0.5 * (K + np.swapaxes(K, -1, -2)))[..., 0] < 0):
                problems.append(f"{name} must be positive semidefinite")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass
class ControlState:
    """Integrators and one-step memories of the controller."""

    body_int: np.ndarray
    joint_int: np.ndarray
    q_r: np.ndarray
    prev_body_err: np.ndarray
    prev_joint_err: np.ndarray
    prev_qdot_r: np.ndarray
    prev_tau_ar: np.ndarray
    prev_tau_star_r: np.ndarray
    started: bool = False

    @classmethod
    def initial(cls, q0, n=N_JOINTS):
        z = np.zeros(n)
        return cls(np.zeros((n, 6)), z.copy(), np.array(q0, dtype=float), np.zeros((n, 6)),
                   z.copy(), z.copy(), z.copy(), z.copy())


@dataclass(frozen=True)
class Desired:
    q: np.ndarray
    qdot: np.ndarray
    qddot: np.ndarray


@dataclass
class ControlOutput:
    tau: np.ndarray
    tau_star_r: np.ndarray
    tau_ar: np.ndarray
    qdot_r: np.ndarray
    qddot_r: np.ndarray
    qdot: np.ndarray
    e_a: np.ndarray
    V: np.ndarray
    V_r: np.ndarray
    A_r: np.ndarray
    Y: np.ndarray
    Y_a: np.ndarray
    net_required: np.ndarray
    F_r: np.ndarray
    chi_D: np.ndarray
    chi_J: np.ndarray
    body_int: np.ndarray
    joint_int: np.ndarray
    q_r: np.ndarray
    gravity: np.ndarray = field(repr=False, default=None)

    @property
    def body_err(self):
        return self.V_r - self.V

    @property
    def joint_err(self):
        return self.qdot_r - self.qdot


def required_joint_velocity(qd_dot, qd, q, lam):
    return qd_dot + lam * (qd - q)


def required_joint_acceleration(qd_ddot, qd_dot, qdot, lam):
    return qd_ddot + lam * (qd_dot - qdot)


def body_control_wrench(Y, phi_hat, net, chi_D, vel_err, int_err, K_D, K_I):
    """Required net wrench of each body (batched over leading dims)."""
    return (np.einsum("...ij,...j->...i", K_D, vel_err)
            + nn_estimate(net, chi_D)
            + np.einsum("...ij,...j->...i", K_I, int_err)
            + np.einsum("...ij,...j->...i", Y, phi_hat))


def barrier_term(e_a, k_b, t=None):
    e_a = np.asarray(e_a, dtype=float)
    k_b = np.broadcast_to(np.asarray(k_b, dtype=float), e_a.shape)
    bad = np.flatnonzero(~(np.abs(e_a) < k_b))
    if bad.size:
        j = int(bad[0])
        raise BarrierBreach(j, float(e_a.flat[j]), float(k_b.flat[j]), t)
    return e_a / (k_b ** 2 - e_a ** 2)


def joint_control_torque(qdot_r, qdot, int_err, Y_a, phi_a_hat, net_J, chi_J, e_a, k_d, k_I, k_b,
                         t=None):
    model = np.einsum("...i,...i->...", Y_a, phi_a_hat)
    return (k_d * (qdot_r - qdot) + k_I * int_err + model
            + nn_estimate(net_J, chi_J)[..., 0] + barrier_term(e_a, k_b, t))


def load_torque(mu, F_r):
    """Component of the required wrench along the joint axis."""
    return np.einsum("...i,...i->...", mu, F_r)


def compose_control(tau_star_r, tau_ar):
    return tau_star_r + tau_ar


def pd_control(q_d, q, qd_dot, qdot, k_p, k_v):
    return k_p * (q_d - q) + k_v * (qd_dot - qdot)


def advance_integrals(cstate, body_err, joint_err, qdot_r, dt):
    """Trapezoidal update of the integrators; the first sample only seeds memories."""
    if not cstate.started:
        return cstate.body_int, cstate.joint_int, cstate.q_r
    h = 0.5 * dt
    return (cstate.body_int + h * (cstate.prev_body_err + body_err),
            cstate.joint_int + h * (cstate.prev_joint_err + joint_err),
            cstate.q_r + h * (cstate.prev_qdot_r + qdot_r))


def evaluate(geom, gains, est, cstate, q, qdot, desired, dt=None, integrals=None, t=None):
    """One evaluation of the control law.

    ``integrals`` may supply ``(body_int, joint_int, q_r)`` directly (used
    when they are integrated as continuous states); otherwise they are
    advanced trapezoidally by ``dt`` from ``cstate``.
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    qdot_r = required_joint_velocity(desired.qdot, desired.q, q, gains.lam)
    qddot_r = required_joint_acceleration(desired.qddot, desired.qdot, qdot, gains.lam)
    V, Vr, Ar, Rw = _plant.required_sweep(*geom.kernel_args(), q, qdot, qdot_r, qddot_r)
    grav = np.einsum("kji,j->ki", Rw, geom.g_world)
    body_err = Vr - V
    joint_err = qdot_r - qdot
    if integrals is None:
        body_int, joint_int, q_r = advance_integrals(cstate, body_err, joint_err, qdot_r, dt)
    else:
        body_int, joint_int, q_r = integrals
    e_a = q_r - q

    Y = _plant.regressor_batch(V, Vr, Ar, grav)
    phi_hat = pseudo_to_phi(est.body_L)
    chi_D = np.concatenate([Vr, V, cstate.body_int, cstate.prev_body_err,
                            cstate.prev_tau_ar[:, None]], axis=1)
    net_required = body_control_wrench(Y, phi_hat, est.body_net, chi_D, body_err, body_int,
                                       gains.K_D, gains.K_I)
    F_r, _ = _plant.force_sweep(*geom.kernel_args(), q, net_required, np.zeros(6))
    tau_ar = load_torque(geom.mu, F_r)

    Y_a = joint_regressor(qddot_r, geom.axes)
    phi_a_hat = pseudo_to_phi(est.joint_L)
    chi_J = np.stack([qddot_r, qdot_r, qdot, e_a, joint_err, cstate.prev_tau_star_r], axis=1)
    tau_star_r = joint_control_torque(qdot_r, qdot, joint_int, Y_a, phi_a_hat, est.joint_net,
                                      chi_J, e_a, gains.k_d, gains.k_I, gains.k_b, t)
    return ControlOutput(compose_control(tau_star_r, tau_ar), tau_star_r, tau_ar, qdot_r, qddot_r,
                         qdot, e_a, V, Vr, Ar, Y, Y_a, net_required, F_r, chi_D, chi_J,
                         body_int, joint_int, q_r, grav)


def commit(cstate, out):
    """Controller memory after an accepted evaluation."""
    return replace(cstate, body_int=out.body_int, joint_int=out.joint_int, q_r=out.q_r,
                   prev_body_err=out.body_err, prev_joint_err=out.joint_err,
                   prev_qdot_r=out.qdot_r, prev_tau_ar=out.tau_ar,
                   prev_tau_star_r=out.tau_star_r, started=True)


def update_estimators(est, gains, out, dt):
    """Euler step of every adaptation law using this evaluation's errors."""
    body_err = out.body_err
    joint_err = out.joint_err
    body_L, body_halvings, body_eigs = nal_step(est.body_L, body_nal_matrix(out.Y, body_err),
                                                gains.gamma1, dt, return_eigs=True)
    S_a = coeff_to_symmetric(out.Y_a * joint_err[:, None])
    joint_L, joint_halvings, joint_eigs = nal_step(est.joint_L, S_a, gains.zeta, dt,
                                                   return_eigs=True)
    body_net = update_body_net(est.body_net, out.chi_D, body_err, gains.Gamma, dt, gains.gamma2)
    joint_net = update_joint_net(est.joint_net, out.chi_J, joint_err, gains.beta1, gains.beta2, dt)
    new = EstimatorState(body_L, joint_L, body_net, joint_net,
                         np.concatenate([body_eigs, joint_eigs]))
    return new, int(body_halvings.sum() + joint_halvings.sum())


def control_step(geom, gains, est, cstate, q, qdot, desired, dt, t=None, adapt=True):
    """Evaluate, then advance controller memory and estimators.

    Returns ``(tau, output, new_cstate, new_est, halvings)``; ``tau`` is the
    torque before actuator limits.
    """
    out = evaluate(geom, gains, est, cstate, q, qdot, desired, dt=dt, t=t)
    new_c = commit(cstate, out)
    halvings = 0
    if adapt:
        est, halvings = update_estimators(est, gains, out, dt)
    return out.tau, out, new_c, est, halvings


def estimated_joint_inertia(est, geom):
    return joint_inertia_estimate(est.joint_L, geom.axes)

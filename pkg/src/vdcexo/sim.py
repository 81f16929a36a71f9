"""Closed-loop simulation, stability bookkeeping and run metrics."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import _plant
from .actuator import apply_constraints
from .body import bregman, mass_matrix, phi_to_pseudo
from .chain import ChainState, plant_forward_dynamics
from .controller import (
    BarrierBreach,
    ControlState,
    Desired,
    control_step,
    evaluate,
    pd_control,
)
from .estimator import NalFailure, initial_estimates, joint_phi
from .spatial import FrameMismatchError, SpatialForce, SpatialVelocity

TELESCOPE_FLOOR = 1e-12


class SimulationAbort(RuntimeError):
    """Run stopped early; ``log`` holds the rows recorded so far."""

    def __init__(self, reason, t, log=None):
        self.reason, self.t, self.log = reason, t, log
        super().__init__(reason)


# ------------------------------------------------------------------ logging

@dataclass
class SimLog:
    """Uniformly sampled run record: ``data[k, c]`` for column ``columns[c]``."""

    columns: list
    units: list
    data: np.ndarray
    meta: dict = field(default_factory=dict)

    def col(self, name):
        return self.data[:, self.columns.index(name)]

    def group(self, prefix):
        idx = [i for i, c in enumerate(self.columns) if c.rsplit("_", 1)[0] == prefix
               and c.rsplit("_", 1)[-1].isdigit()]
        return self.data[:, idx]

    @property
    def t(self):
        return self.col("t")

    def header(self):
        return [f"{c} [{u}]" for c, u in zip(self.columns, self.units)]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for row in self.data:
                w.writerow([f"{x:.17g}" for x in row])

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        cols, units = [], []
        for h in rows[0]:
            name, unit = h.rsplit(" [", 1)
            cols.append(name)
            units.append(unit[:-1])
        data = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, len(cols))
        return cls(cols, units, data)


def _columns(n, diagnostics):
    layout = [("t", "s", 1)]
    layout += [("q", "rad", n), ("q_d", "rad", n), ("qdot", "rad/s", n), ("e", "rad", n),
             ("e_a", "rad", n), ("tau_cmd", "N m", n), ("tau_app", "N m", n),
             ("W_body", "1", n), ("eps_body", "1", n), ("phi_body", "1", n),
             ("W_joint", "1", n), ("eps_joint", "1", n), ("phi_joint", "1", n),
             ("min_eig", "1", 2 * n)]
    layout += [("telescope_residual", "W", 1), ("telescope_rel", "1", 1)]
    if diagnostics:
        layout += [("nu", "J", 1), ("nu_body", "J", n), ("nu_joint", "J", n),
                 ("dissipation", "W", 1), ("bregman_body", "1", n), ("bregman_joint", "1", n)]
    cols, units = [], []
    for name, unit, k in layout:
        if k == 1:
            cols.append(name)
            units.append(unit)
        else:
            cols += [f"{name}_{i + 1}" for i in range(k)]
            units += [unit] * k
    return cols, units


# ---------------------------------------------------------- bookkeeping

def vpf(v_r, v, f_r, f):
    """Virtual power flow ``(V_r - V)^T (F_r - F)`` at one frame."""
    vecs = []
    frames = set()
    for x in (v_r, v, f_r, f):
        if isinstance(x, (SpatialVelocity, SpatialForce)):
            frames.add(x.frame)
            vecs.append(x.vector)
        else:
            vecs.append(np.asarray(x, dtype=float))
    if len(frames) > 1:
        raise FrameMismatchError(f"virtual power flow needs one common frame, got {sorted(frames)}")
    return float((vecs[0] - vecs[1]) @ (vecs[2] - vecs[3]))


@dataclass
class SweepData:
    """Measured and required quantities of one control instant."""

    V_r: np.ndarray           # (n, 6) required twists of B_i
    V: np.ndarray             # (n, 6) measured twists of B_i
    net_r: np.ndarray         # (n, 6) required net wrenches F*_r
    net: np.ndarray           # (n, 6) actual net wrenches F*
    qdot_r: np.ndarray
    qdot: np.ndarray
    tau_star_r: np.ndarray
    tau_star: np.ndarray
    p_base: float = 0.0       # VPF at T0
    p_tip: float = 0.0        # VPF at T_n


def telescoping_residual(d):
    """Sum of subsystem VPF terms minus ``p_T0 - p_Tn``, and its magnitude scale."""
    body_terms = np.einsum("ij,ij->i", d.V_r - d.V, d.net_r - d.net)
    joint_terms = (d.qdot_r - d.qdot) * (d.tau_star_r - d.tau_star)
    res = float(body_terms.sum() + joint_terms.sum() - (d.p_base - d.p_tip))
    scale = float(np.abs(body_terms).sum() + np.abs(joint_terms).sum()
                  + abs(d.p_base) + abs(d.p_tip))
    return res, scale


def actual_sweep(geom, state, tau_cmd, tau_applied, dist, tau_h, out):
    """Actual net wrenches and joint net torques paired with a controller output.

    The joint net torque is ``tau_cmd - mu^T F_B`` so both required and
    actual joint quantities refer to the same designed torque.
    """
    qdd = plant_forward_dynamics(geom, state, tau_applied, dist, tau_h)
    net, FB = _plant.inverse_sweep(*geom.kernel_args(), geom.phi, state.q, state.qdot, qdd,
                                   np.asarray(dist, dtype=float), geom.g_world)
    tau_star = tau_cmd - np.einsum("ij,ij->i", geom.mu, FB)
    return SweepData(out.V_r, out.V, out.net_required, net, out.qdot_r, state.qdot,
                     out.tau_star_r, tau_star), qdd


@dataclass
class Truth:
    """True augmented parameters used only for diagnostics."""

    body_L: np.ndarray
    joint_L: np.ndarray
    M: np.ndarray
    inertia: np.ndarray

    @classmethod
    def of(cls, geom):
        return cls(phi_to_pseudo(geom.phi), phi_to_pseudo(joint_phi(geom.joint_inertia)),
                   np.array([mass_matrix(p) for p in geom.phi]), geom.joint_inertia.copy())


def accompanying_functions(out, est, gains, truth):
    """Per-subsystem accompanying functions ``nu_i`` (bodies) and ``nu_ai`` (joints).

    The ideal network weights and offsets are taken as zero, which is exact
    when the plant has no unmodelled terms.  Returns ``(nu_body, nu_joint,
    bregman_body, bregman_joint)``.
    """
    err = out.body_err
    kin = 0.5 * np.einsum("ki,kij,kj->k", err, truth.M, err)
    integ = 0.5 * np.einsum("ki,kij,kj->k", out.body_int, gains.K_I, out.body_int)
    br_b = bregman(truth.body_L, est.body_L)
    W = est.body_net.weights
    if np.ndim(gains.Gamma) == 0:
        w_term = 0.5 * np.sum(W ** 2, axis=(-2, -1)) / gains.Gamma
    else:
        Ginv = np.linalg.inv(gains.Gamma)
        w_term = 0.5 * np.einsum("...jo,jk,...ko->...", W, Ginv, W)
    eps_term = 0.5 * np.sum(est.body_net.offset ** 2, axis=-1) / gains.gamma2
    nu_body = kin + integ + gains.gamma1 * br_b + w_term + eps_term

    jerr = out.joint_err
    br_j = bregman(truth.joint_L, est.joint_L)
    k_b = gains.k_b
    nu_joint = (0.5 * truth.inertia * jerr ** 2 + 0.5 * gains.k_I * out.joint_int ** 2
                + gains.zeta * br_j
                + 0.5 * est.joint_net.offset[:, 0] ** 2 / gains.beta2
                + 0.5 * np.sum(est.joint_net.weights[..., 0] ** 2, axis=-1) / gains.beta1
                + 0.5 * np.log(k_b ** 2 / (k_b ** 2 - out.e_a ** 2)))
    return nu_body, nu_joint, br_b, br_j


def dissipation(out, gains):
    """``sum k_d (qdot_r - qdot)^2 + err^T K_D err`` at one instant."""
    err = out.body_err
    return float(np.sum(gains.k_d * out.joint_err ** 2)
                 + np.einsum("ki,kij,kj->", err, gains.K_D, err))


# ---------------------------------------------------------------- running

def desired_at(cfg, t):
    tr = cfg.trajectory
    return Desired(tr.value(t), tr.rate(t), tr.accel(t))


def _initial_estimates(cfg):
    rng = np.random.default_rng(cfg.seed)
    e = cfg.estimator
    geom = cfg.geometry
    frac = e.initial_fraction
    norm_b = (np.zeros(25), np.array(e.body_input_scale)) if e.body_input_scale else None
    norm_j = (np.zeros(6), np.array(e.joint_input_scale)) if e.joint_input_scale else None
    return initial_estimates(rng, frac * geom.phi, frac * geom.joint_inertia, e.n_units, e.width,
                             body_norm=norm_b, joint_norm=norm_j)


class _Recorder:
    def __init__(self, cfg, n_rows):
        self.cols, self.units = _columns(cfg.geometry.n, cfg.diagnostics)
        self.data = np.full((n_rows, len(self.cols)), np.nan)
        self.k = 0

    def add(self, row):
        self.data[self.k] = row
        self.k += 1

    def log(self, cfg, meta):
        return SimLog(self.cols, self.units, self.data[:self.k].copy(), meta)


def _est_row(est, n):
    if est is None:
        return np.zeros(6 * n), np.full(2 * n, np.nan)
    nm = est.norms()
    return (np.concatenate([nm["body_W"], nm["body_eps"], nm["body_phi"], nm["joint_W"],
                            nm["joint_eps"], nm["joint_phi"]]), est.min_eigenvalues())


def run(cfg):
    """Simulate one scenario; returns a :class:`SimLog`.

    Raises :class:`SimulationAbort` (with the partial log attached) on a
    barrier breach, a failed parameter update or a non-finite state.
    """
    if cfg.mode == "continuous":
        return run_continuous(cfg)
    geom = cfg.geometry
    n = geom.n
    dt = cfg.dt
    h = dt / cfg.substeps
    kargs = geom.kernel_args()
    phi = geom.phi
    jin = geom.joint_inertia
    gw = geom.g_world
    steps = cfg.steps
    rows = steps // cfg.decimate + 1
    rec = _Recorder(cfg, rows)
    truth = Truth.of(geom) if cfg.diagnostics and cfg.controller == "vdc" else None

    q = cfg.q0.astype(float).copy()
    qd = cfg.qdot0.astype(float).copy()
    vdc = cfg.controller == "vdc"
    est = _initial_estimates(cfg) if vdc else None
    cstate = ControlState.initial(q, n)
    sat_count = np.zeros(n, dtype=int)
    halvings = 0
    max_tele = 0.0
    meta = {"scenario": cfg.name, "controller": cfg.controller, "dt": dt, "seed": cfg.seed,
            "decimate": cfg.decimate}

    for k in range(steps + 1):
        t = k * dt
        des = desired_at(cfg, t)
        state = ChainState(q, qd)
        est_before = est
        out = None
        try:
            if vdc:
                tau_cmd, out, cstate, est, hv = control_step(
                    geom, cfg.gains, est, cstate, q, qd, des, dt, t=t, adapt=cfg.estimator.adapt)
                halvings += hv
            else:
                tau_cmd = pd_control(des.q, q, des.qdot, qd, cfg.gains.k_p, cfg.gains.k_v)
        except BarrierBreach as exc:
            raise SimulationAbort(f"barrier breach at t={t:.3f} s (joint {exc.joint + 1}, "
                                  f"|e_a|={abs(exc.e_a):.6g} rad >= k_b={exc.k_b:.6g} rad)",
                                  t, rec.log(cfg, meta)) from None
        except NalFailure as exc:
            raise SimulationAbort(f"parameter update failed at t={t:.3f} s: {exc}", t,
                                  rec.log(cfg, meta)) from None
        if cfg.constraints_enabled and cfg.constraints:
            tau_app = apply_constraints(tau_cmd, cfg.constraints)
            sat_count += tau_app != tau_cmd
        else:
            tau_app = tau_cmd.copy()
        dist = cfg.disturbance.value(t)
        tau_h = cfg.human_torque.value(t)

        if k % cfg.decimate == 0:
            e_a = out.e_a if vdc else np.zeros(n)
            norms, eigs = _est_row(est_before, n)
            tele = rel = 0.0
            if vdc:
                sweep, _ = actual_sweep(geom, state, tau_cmd, tau_app, dist, tau_h, out)
                tele, scale = telescoping_residual(sweep)
                rel = abs(tele) / max(scale, TELESCOPE_FLOOR)
                max_tele = max(max_tele, rel)
            row = [t, *q, *des.q, *qd, *(des.q - q), *e_a, *tau_cmd, *tau_app, *norms, *eigs,
                   tele, rel]
            if cfg.diagnostics:
                if truth is not None:
                    nb, nj, bb, bj = accompanying_functions(out, est_before, cfg.gains, truth)
                    row += [nb.sum() + nj.sum(), *nb, *nj, dissipation(out, cfg.gains), *bb, *bj]
                else:
                    row += [np.nan] * (3 + 4 * n)
            rec.add(row)
        if k == steps:
            break
        q, qd = _plant.rk4_steps(*kargs, phi, jin, q, qd, tau_app, dist, tau_h, gw, h,
                                 cfg.substeps)
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qd))):
            raise SimulationAbort(f"non-finite state at t={t + dt:.3f} s", t + dt,
                                  rec.log(cfg, meta))

    meta.update(saturation_fraction=(sat_count / (steps + 1)).tolist(), nal_halvings=halvings,
                max_telescope_rel=max_tele)
    return rec.log(cfg, meta)


# -------------------------------------------------- continuous-time runs

def run_continuous(cfg):
    """Ideal-case run with the controller evaluated at every integrator stage.

    Controller integrators and the accumulated dissipation are integrated
    as extra ODE states alongside the plant, so the accompanying function
    can be compared with the dissipation integral to integrator accuracy.
    Estimators are held fixed (no adaptation).
    """
    if cfg.controller != "vdc":
        raise ValueError("continuous mode is only defined for the VDC controller")
    geom = cfg.geometry
    n = geom.n
    dt = cfg.dt
    h = dt / cfg.substeps
    est = _initial_estimates(cfg)
    truth = Truth.of(geom)
    gains = cfg.gains
    cstate = ControlState.initial(cfg.q0, n)
    lim = cfg.constraints if (cfg.constraints_enabled and cfg.constraints) else None

    def rhs(t, x):
        q, qd = x[:n], x[n:2 * n]
        bi = x[2 * n:8 * n].reshape(n, 6)
        ji = x[8 * n:9 * n]
        qr = x[9 * n:10 * n]
        out = evaluate(geom, gains, est, cstate, q, qd, desired_at(cfg, t), integrals=(bi, ji, qr),
                       t=t)
        tau = apply_constraints(out.tau, lim) if lim else out.tau
        qdd = plant_forward_dynamics(geom, ChainState(q, qd), tau, cfg.disturbance.value(t),
                                     cfg.human_torque.value(t))
        return np.concatenate([qd, qdd, out.body_err.ravel(), out.joint_err, out.qdot_r,
                               [dissipation(out, gains)]]), out

    x = np.concatenate([cfg.q0, cfg.qdot0, np.zeros(6 * n), np.zeros(n), cfg.q0, [0.0]])
    cols, units = _columns(n, True)
    cols += ["dissipation_integral"]
    units += ["J"]
    data = []
    meta = {"scenario": cfg.name, "controller": "vdc", "dt": dt, "seed": cfg.seed,
            "mode": "continuous"}
    norms, eigs = _est_row(est, n)
    steps = cfg.steps
    for k in range(steps + 1):
        t = k * dt
        try:
            f0, out = rhs(t, x)
        except BarrierBreach as exc:
            raise SimulationAbort(f"barrier breach at t={t:.3f} s (joint {exc.joint + 1})", t,
                                  SimLog(cols, units, np.array(data).reshape(-1, len(cols)),
                                         meta)) from None
        q, qd = x[:n], x[n:2 * n]
        des = desired_at(cfg, t)
        nb, nj, bb, bj = accompanying_functions(out, est, gains, truth)
        state = ChainState(q, qd)
        tau_app = apply_constraints(out.tau, lim) if lim else out.tau
        sweep, _ = actual_sweep(geom, state, out.tau, tau_app, cfg.disturbance.value(t),
                                cfg.human_torque.value(t), out)
        tele, scale = telescoping_residual(sweep)
        row = [t, *q, *des.q, *qd, *(des.q - q), *out.e_a, *out.tau, *tau_app, *norms, *eigs,
               tele, abs(tele) / max(scale, TELESCOPE_FLOOR),
               nb.sum() + nj.sum(), *nb, *nj, f0[-1], *bb, *bj, x[-1]]
        data.append(row)
        if k == steps:
            break
        for s in range(cfg.substeps):
            ts = t + s * h
            k1 = f0 if s == 0 else rhs(ts, x)[0]
            k2 = rhs(ts + 0.5 * h, x + 0.5 * h * k1)[0]
            k3 = rhs(ts + 0.5 * h, x + 0.5 * h * k2)[0]
            k4 = rhs(ts + h, x + h * k3)[0]
            x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise SimulationAbort(f"non-finite state at t={t + dt:.3f} s", t + dt)
    return SimLog(cols, units, np.array(data), meta)


# ---------------------------------------------------------------- metrics

@dataclass
class Metrics:
    rms_error: np.ndarray
    max_error: np.ndarray
    max_e_a: np.ndarray
    barrier_margin: float
    max_torque: np.ndarray
    rms_torque: np.ndarray
    saturation_fraction: np.ndarray
    final_norms: dict

    def as_rows(self):
        rows = []
        n = len(self.rms_error)
        for name in ("rms_error", "max_error", "max_e_a", "max_torque", "rms_torque",
                     "saturation_fraction"):
            vals = getattr(self, name)
            rows += [(f"{name}_{i + 1}", float(vals[i])) for i in range(n)]
        rows.append(("barrier_margin", float(self.barrier_margin)))
        rows += [(k, float(v)) for k, v in self.final_norms.items()]
        return rows


def _rms(x):
    return np.sqrt(np.mean(x ** 2, axis=0)) if len(x) else np.zeros(x.shape[1:])


def _max_abs(x):
    return np.max(np.abs(x), axis=0) if len(x) else np.zeros(x.shape[1:])


def metrics(log, k_b=None):
    """Summary statistics of a run log."""
    e = log.group("e")
    e_a = log.group("e_a")
    cmd = log.group("tau_cmd")
    app = log.group("tau_app")
    n = e.shape[1]
    max_ea = _max_abs(e_a)
    margin = float(np.min(np.asarray(k_b) - max_ea)) if k_b is not None else float("nan")
    sat = (np.mean(app != cmd, axis=0) if len(cmd) else np.zeros(n))
    final = {}
    if len(log.data):
        for prefix in ("W_body", "eps_body", "phi_body", "W_joint", "eps_joint", "phi_joint"):
            last = log.group(prefix)[-1]
            if last.size:
                final[f"final_{prefix}_max"] = float(np.max(last))
    return Metrics(_rms(e), _max_abs(e), max_ea, margin, _max_abs(cmd), _rms(cmd), sat, final)

"""Online estimators: Gaussian RBF networks and the natural adaptation law.

Every function accepts leading batch dimensions so the seven body (or
joint) subsystems can be updated in one call.  Networks are immutable;
updates return new instances.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _plant
from .body import coeff_to_symmetric, min_eig, phi_to_pseudo, pseudo_to_phi

N_UNITS = 9
MAX_HALVINGS = 20


class NalFailure(RuntimeError):
    """Natural adaptation step could not keep the estimate positive definite."""


@dataclass(frozen=True, eq=False)
class RbfNet:
    """Gaussian RBF network ``W^T psi(chi) + eps``.

    Shapes (``...`` is an optional batch): ``centers (..., j, d)``,
    ``widths (..., j)``, ``weights (..., j, out)``, ``offset (..., out)``.
    ``input_scale``/``input_shift`` optionally map raw inputs affinely
    before the basis is evaluated.
    """

    centers: np.ndarray
    widths: np.ndarray
    weights: np.ndarray
    offset: np.ndarray
    input_shift: np.ndarray | None = None
    input_scale: np.ndarray | None = None

    def __post_init__(self):
        if np.any(np.asarray(self.widths) <= 0):
            raise ValueError("RBF widths must be positive")
        if self.centers.shape[:-1] != self.widths.shape:
            raise ValueError("centers and widths disagree on the number of units")
        if self.weights.shape[:-1] != self.widths.shape:
            raise ValueError("weights and widths disagree on the number of units")

    @property
    def input_dim(self):
        return self.centers.shape[-1]

    @property
    def output_dim(self):
        return self.weights.shape[-1]


def make_net(rng, input_dim, output_dim, batch=(), n_units=N_UNITS, width=1.0,
             input_shift=None, input_scale=None):
    """Zero-weight network with centres drawn uniformly from ``[-1, 1]``."""
    batch = tuple(batch)
    centers = rng.uniform(-1.0, 1.0, size=batch + (n_units, input_dim))
    return RbfNet(centers, np.full(batch + (n_units,), float(width)),
                  np.zeros(batch + (n_units, output_dim)), np.zeros(batch + (output_dim,)),
                  input_shift, input_scale)


def _normalized(net, chi):
    chi = np.asarray(chi, dtype=float)
    if chi.shape[-1] != net.input_dim:
        raise ValueError(f"RBF input has dimension {chi.shape[-1]}, network expects {net.input_dim}")
    if net.input_scale is not None:
        chi = (chi - net.input_shift) / net.input_scale
    return chi


def rbf_basis(chi, net):
    chi = _normalized(net, chi)
    if chi.ndim == 2 and net.centers.ndim == 3 and chi.shape[0] == net.centers.shape[0]:
        return _plant.rbf_basis_batch(chi, net.centers, net.widths)
    d2 = np.sum((chi[..., None, :] - net.centers) ** 2, axis=-1)
    return np.exp(-d2 / net.widths ** 2)


def nn_estimate(net, chi):
    psi = rbf_basis(chi, net)
    return np.einsum("...j,...jo->...o", psi, net.weights) + net.offset


def update_body_net(net, chi, vel_err, gain, dt, offset_gain):
    """Euler step of ``dW = Gamma psi err^T`` and ``d eps = offset_gain err``.

    ``gain`` is the ``j x j`` matrix ``Gamma`` (or a scalar multiple of the
    identity); ``offset_gain`` may be a scalar or broadcast over the batch.
    """
    psi = rbf_basis(chi, net)
    err = np.asarray(vel_err, dtype=float)
    g_psi = psi * gain if np.ndim(gain) == 0 else np.einsum("...jk,...k->...j", gain, psi)
    weights = net.weights + dt * g_psi[..., :, None] * err[..., None, :]
    offset = net.offset + dt * np.asarray(offset_gain)[..., None] * err
    return replace(net, weights=weights, offset=offset)


def update_joint_net(net, chi, qdot_err, weight_gain, offset_gain, dt):
    """Scalar-output analogue of :func:`update_body_net`."""
    psi = rbf_basis(chi, net)
    err = np.asarray(qdot_err, dtype=float)
    weights = net.weights + dt * (np.asarray(weight_gain) * err)[..., None, None] * psi[..., :, None]
    offset = net.offset + dt * (np.asarray(offset_gain) * err)[..., None]
    return replace(net, weights=weights, offset=offset)


def nal_step(L_hat, S, gain, dt, return_eigs=False):
    """Explicit Euler step of ``dL/dt = (1/gain) L S L``, symmetrized.

    When a step would lose positive definiteness it is halved (per batch
    element) up to 20 times.  Returns the new estimate and the number of
    halvings applied to each element, plus the minimum eigenvalues of the
    result when ``return_eigs`` is set.
    """
    L_hat = np.asarray(L_hat, dtype=float)
    S = np.asarray(S, dtype=float)
    batch = L_hat.shape[:-2]
    flat_L = np.ascontiguousarray(L_hat.reshape(-1, 4, 4))
    flat_S = np.ascontiguousarray(np.broadcast_to(S, L_hat.shape).reshape(-1, 4, 4))
    out, halvings, eigs, failed = _plant.nal_batch(flat_L, flat_S, float(gain), float(dt),
                                                   MAX_HALVINGS)
    if failed >= 0:
        raise NalFailure("parameter estimate lost positive definiteness after "
                         f"{MAX_HALVINGS} step halvings")
    out = out.reshape(L_hat.shape)
    halvings = halvings.reshape(batch)
    eigs = eigs.reshape(batch)
    return (out, halvings, eigs) if return_eigs else (out, halvings)


def body_nal_matrix(Y, vel_err):
    """``S(Y^T err)`` for the rigid-body parameter update."""
    s = np.einsum("...ki,...k->...i", Y, vel_err)
    return coeff_to_symmetric(s)


def joint_phi(inertia):
    """Embed a scalar joint inertia as a 10-vector: unit dummy mass, isotropic inertia.

    The pseudo-inertia is then ``diag(I/2, I/2, I/2, 1)``, positive definite
    for any ``I > 0``.
    """
    inertia = np.asarray(inertia, dtype=float)
    phi = np.zeros(inertia.shape + (10,))
    phi[..., 0] = 1.0
    phi[..., 4:7] = inertia[..., None]
    return phi


def joint_regressor(qddot_r, axes):
    """1 x 10 joint regressor rows: ``qddot_r`` in the joint axis' inertia slot."""
    qddot_r = np.asarray(qddot_r, dtype=float)
    Y = np.zeros(qddot_r.shape + (10,))
    idx = 4 + np.asarray(axes)
    np.put_along_axis(Y, idx[..., None], qddot_r[..., None], axis=-1)
    return Y


def joint_inertia_estimate(L_hat, axes):
    phi = pseudo_to_phi(L_hat)
    return np.take_along_axis(phi, 4 + np.asarray(axes)[..., None], axis=-1)[..., 0]


@dataclass(frozen=True, eq=False)
class EstimatorState:
    """Per-subsystem estimates for the whole chain."""

    body_L: np.ndarray
    joint_L: np.ndarray
    body_net: RbfNet
    joint_net: RbfNet
    # minimum eigenvalues of body_L then joint_L, if already known
    known_eigs: np.ndarray | None = field(default=None, repr=False)

    @property
    def body_phi(self):
        return pseudo_to_phi(self.body_L)

    def norms(self):
        """Frobenius norms per subsystem: body W, body eps, body phi, joint W, joint eps, joint inertia."""
        return {
            "body_W": np.linalg.norm(self.body_net.weights, axis=(-2, -1)),
            "body_eps": np.linalg.norm(self.body_net.offset, axis=-1),
            "body_phi": np.linalg.norm(self.body_phi, axis=-1),
            "joint_W": np.linalg.norm(self.joint_net.weights, axis=(-2, -1)),
            "joint_eps": np.abs(self.joint_net.offset[..., 0]),
            "joint_phi": np.linalg.norm(pseudo_to_phi(self.joint_L), axis=-1),
        }

    def min_eigenvalues(self):
        if self.known_eigs is not None:
            return self.known_eigs
        return np.concatenate([min_eig(self.body_L), min_eig(self.joint_L)])


def initial_estimates(rng, body_phi0, joint_inertia0, n_units=N_UNITS, width=1.0,
                      body_input_dim=25, joint_input_dim=6, body_norm=None, joint_norm=None):
    n = len(joint_inertia0)
    body_norm = body_norm or (None, None)
    joint_norm = joint_norm or (None, None)
    return EstimatorState(
        phi_to_pseudo(np.asarray(body_phi0, dtype=float)),
        phi_to_pseudo(joint_phi(joint_inertia0)),
        make_net(rng, body_input_dim, 6, (n,), n_units, width, *body_norm),
        make_net(rng, joint_input_dim, 1, (n,), n_units, width, *joint_norm),
    )

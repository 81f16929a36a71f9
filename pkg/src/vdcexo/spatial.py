"""6D spatial vectors and frame transforms.

Velocities are ordered ``[v, w]`` (linear first) and forces ``[f, m]``.
A :class:`FrameTransform` from parent ``A`` to child ``B`` holds the 6x6
matrix ``U = [[R, 0], [skew(r) R, R]]`` which maps child forces into the
parent frame (``F_A = U F_B``); its transpose maps parent velocities into
the child frame (``V_B = U^T V_A``).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ORTHO_TOL = 1e-8


class FrameMismatchError(ValueError):
    """Raised when a spatial quantity is used in the wrong frame."""


def skew(r):
    r = np.asarray(r, dtype=float)
    return np.array([
        [0.0, -r[2], r[1]],
        [r[2], 0.0, -r[0]],
        [-r[1], r[0], 0.0],
    ])


def transform_matrix(R, r):
    """Raw 6x6 ``U`` block matrix for rotation ``R`` and offset ``r``."""
    R = np.asarray(R, dtype=float)
    U = np.zeros((6, 6))
    U[:3, :3] = R
    U[3:, 3:] = R
    U[3:, :3] = skew(r) @ R
    return U


def motion_cross(V):
    """Matrix of ``V x (.)`` acting on motion vectors ``[v, w]``."""
    V = np.asarray(V, dtype=float)
    X = np.zeros((6, 6))
    sw = skew(V[3:])
    X[:3, :3] = sw
    X[:3, 3:] = skew(V[:3])
    X[3:, 3:] = sw
    return X


def force_cross(V):
    """Matrix of ``V x* (.)`` acting on force vectors ``[f, m]``."""
    return -motion_cross(V).T


def is_rotation(R, tol=ORTHO_TOL):
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return (np.allclose(R.T @ R, np.eye(3), atol=tol, rtol=0.0)
            and abs(np.linalg.det(R) - 1.0) < tol)


def rotation_about(axis, angle):
    """Rotation matrix about coordinate axis 0/1/2 (x/y/z)."""
    c, s = np.cos(angle), np.sin(angle)
    if axis == 0:
        return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])
    if axis == 1:
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    if axis == 2:
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    raise ValueError(f"axis must be 0, 1 or 2, got {axis!r}")


def _vec6(a, name):
    a = np.array(a, dtype=float).reshape(-1)
    if a.shape != (6,):
        raise ValueError(f"{name} must have 6 components, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpatialVelocity:
    """Twist ``[v (m/s), w (rad/s)]`` expressed in ``frame``."""

    vector: np.ndarray
    frame: str

    def __post_init__(self):
        object.__setattr__(self, "vector", _vec6(self.vector, "velocity"))

    @classmethod
    def from_parts(cls, linear, angular, frame):
        return cls(np.concatenate([linear, angular]), frame)

    @property
    def linear(self):
        return self.vector[:3]

    @property
    def angular(self):
        return self.vector[3:]


@dataclass(frozen=True)
class SpatialForce:
    """Wrench ``[f (N), m (N m)]`` expressed in ``frame``."""

    vector: np.ndarray
    frame: str

    def __post_init__(self):
        object.__setattr__(self, "vector", _vec6(self.vector, "force"))

    @classmethod
    def from_parts(cls, force, moment, frame):
        return cls(np.concatenate([force, moment]), frame)

    @property
    def force(self):
        return self.vector[:3]

    @property
    def moment(self):
        return self.vector[3:]


@dataclass(frozen=True)
class FrameTransform:
    """Rigid transform from ``parent`` to ``child``.

    ``offset`` points from the parent origin to the child origin and is
    expressed in the parent frame.
    """

    rotation: np.ndarray
    offset: np.ndarray
    parent: str = "A"
    child: str = "B"
    U: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float)
        r = np.array(self.offset, dtype=float).reshape(-1)
        if r.shape != (3,) or not np.all(np.isfinite(r)):
            raise ValueError("offset must be a finite 3-vector")
        if not is_rotation(R):
            raise ValueError("rotation is not orthonormal with det +1")
        U = transform_matrix(R, r)
        for a in (R, r, U):
            a.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "offset", r)
        object.__setattr__(self, "U", U)

    def inverse(self):
        Rt = self.rotation.T
        return FrameTransform(Rt, -Rt @ self.offset, self.child, self.parent)


def make_transform(R, r, parent="A", child="B"):
    return FrameTransform(R, r, parent, child)


def identity_transform(frame_a="A", frame_b="B"):
    return FrameTransform(np.eye(3), np.zeros(3), frame_a, frame_b)


def velocity_to_child(T, v_parent):
    if v_parent.frame != T.parent:
        raise FrameMismatchError(
            f"velocity in {v_parent.frame!r}, transform expects {T.parent!r}")
    return SpatialVelocity(T.U.T @ v_parent.vector, T.child)


def force_to_parent(T, f_child):
    if f_child.frame != T.child:
        raise FrameMismatchError(
            f"force in {f_child.frame!r}, transform expects {T.child!r}")
    return SpatialForce(T.U @ f_child.vector, T.parent)


def compose(T_ab, T_bc):
    """Transform ``a -> c`` from ``a -> b`` and ``b -> c``.

    The resulting ``U`` equals ``T_ab.U @ T_bc.U``.
    """
    if T_ab.child != T_bc.parent:
        raise FrameMismatchError(
            f"cannot chain {T_ab.parent}->{T_ab.child} with "
            f"{T_bc.parent}->{T_bc.child}")
    R = T_ab.rotation @ T_bc.rotation
    r = T_ab.offset + T_ab.rotation @ T_bc.offset
    return FrameTransform(R, r, T_ab.parent, T_bc.child)


def power(v, f):
    """Inner product of a velocity and a force in the same frame."""
    if v.frame != f.frame:
        raise FrameMismatchError(f"velocity in {v.frame!r}, force in {f.frame!r}")
    return float(v.vector @ f.vector)

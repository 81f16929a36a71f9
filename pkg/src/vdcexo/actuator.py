"""Actuator input constraint: saturation combined with a dead zone.

With a dead-zone inverse in the loop the combined nonlinearity reduces to a
plain clamp whose levels are shifted by the dead-zone offsets.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ConstraintParams:
    """Saturation levels ``k_max > 0 > k_min``, dead-zone offsets and slopes (N m)."""

    k_max: float = 12.0
    k_min: float = -12.0
    m_right: float = 0.2
    m_left: float = -0.2
    slope_right: float = 1.0
    slope_left: float = 1.0

    def __post_init__(self):
        problems = []
        if not self.k_max > 0:
            problems.append(f"k_max must be > 0, got {self.k_max}")
        if not self.k_min < 0:
            problems.append(f"k_min must be < 0, got {self.k_min}")
        if not self.m_right >= 0:
            problems.append(f"m_right must be >= 0, got {self.m_right}")
        if not self.m_left <= 0:
            problems.append(f"m_left must be <= 0, got {self.m_left}")
        if not (self.slope_right > 0 and self.slope_left > 0):
            problems.append("dead-zone slopes must be positive")
        if not problems and not self.upper > 0 > self.lower:
            problems.append(f"clamp levels must straddle zero, got [{self.lower}, {self.upper}]")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def upper(self):
        return self.slope_right * (self.k_max - self.m_right)

    @property
    def lower(self):
        return self.slope_left * (self.k_min - self.m_left)

    def scaled(self, factor):
        return ConstraintParams(factor * self.k_max, factor * self.k_min,
                                factor * self.m_right, factor * self.m_left,
                                self.slope_right, self.slope_left)


def saturate_deadzone(pi, p):
    """Equivalent constrained torque; identity strictly between the clamp levels."""
    return np.clip(pi, p.lower, p.upper)


def apply_constraints(tau, params):
    """Clamp a torque vector joint by joint."""
    lo = np.array([p.lower for p in params])
    hi = np.array([p.upper for p in params])
    return np.clip(tau, lo, hi)


@dataclass(frozen=True)
class SplitConstraint:
    """Rigid-body and joint shares of one joint's constraint."""

    body: ConstraintParams
    joint: ConstraintParams

    @property
    def upper(self):
        return self.body.upper + self.joint.upper

    @property
    def lower(self):
        return self.body.lower + self.joint.lower


def split_levels(total, fraction=0.5):
    """Split ``total`` so the two shares' clamp levels add back to the total's."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"split fraction must lie in (0, 1), got {fraction}")
    return SplitConstraint(total.scaled(fraction), total.scaled(1.0 - fraction))


def default_joint_limits(n=7):
    """Simulation levels: clamp at 11.8 N m on joints 1-4 and 1.15 N m on the wrist."""
    big = ConstraintParams(12.0, -12.0, 0.2, -0.2)
    small = ConstraintParams(1.2, -1.2, 0.05, -0.05)
    return tuple(big if i < 4 else small for i in range(n))

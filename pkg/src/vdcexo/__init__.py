"""Decentralized adaptive control of a 7-DoF arm exoskeleton in simulation.

Submodules, bottom up: :mod:`spatial` (6-D motion/force algebra),
:mod:`body` (single rigid body), :mod:`chain` (serial chain kinematics and
plant), :mod:`actuator`, :mod:`estimator`, :mod:`controller`,
:mod:`scenario` (config files), :mod:`sim` (closed loop) and :mod:`cli`.
"""

__version__ = "0.1.0"

"""Scenario description and its TOML loader.

A scenario file is TOML with the sections ``run``, ``geometry``,
``inertia``, ``gains``, ``trajectory``, ``disturbance``, ``human_torque``,
``constraints`` and ``estimator``.  Every key is optional except the chain
geometry and inertia; missing gains fall back to the defaults of
:class:`~vdcexo.controller.ControlGains`.  See ``docs/scenario_format.md``
for the full grammar.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .actuator import ConstraintParams
from .body import is_physical, params_from
from .chain import AXIS_NAMES, GRAVITY, ChainGeometry
from .controller import ControlGains

N = 7
BUNDLED = Path(__file__).parent / "scenarios"


class ScenarioError(ValueError):
    """Invalid scenario; ``problems`` lists every violation found."""

    def __init__(self, problems, source=None):
        self.problems = list(problems)
        head = f"invalid scenario {source}" if source else "invalid scenario"
        super().__init__(head + ":\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass(frozen=True, eq=False)
class Sinusoids:
    """``offset + amplitude * sin(frequency * t + phase)`` per component (rad/s frequencies)."""

    offset: np.ndarray
    amplitude: np.ndarray
    frequency: np.ndarray
    phase: np.ndarray

    @classmethod
    def zeros(cls, n):
        z = np.zeros(n)
        return cls(z, z, z, z)

    def value(self, t):
        return self.offset + self.amplitude * np.sin(self.frequency * t + self.phase)

    def rate(self, t):
        return self.amplitude * self.frequency * np.cos(self.frequency * t + self.phase)

    def accel(self, t):
        return -self.amplitude * self.frequency ** 2 * np.sin(self.frequency * t + self.phase)


@dataclass(frozen=True, eq=False)
class DisturbanceSpec:
    """Per-link wrench ``link_scale[i] * wrench(t)`` in each body frame."""

    wrench: Sinusoids
    link_scale: np.ndarray

    def value(self, t):
        return self.link_scale[:, None] * self.wrench.value(t)[None, :]


@dataclass(frozen=True)
class EstimatorConfig:
    n_units: int = 9
    width: float = 1.0
    initial_fraction: float = 0.5
    adapt: bool = True
    body_input_scale: tuple | None = None
    joint_input_scale: tuple | None = None


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    geometry: ChainGeometry
    name: str = "scenario"
    controller: str = "vdc"
    gains: ControlGains = field(default_factory=ControlGains)
    trajectory: Sinusoids = field(default_factory=lambda: Sinusoids.zeros(N))
    disturbance: DisturbanceSpec = field(
        default_factory=lambda: DisturbanceSpec(Sinusoids.zeros(6), np.zeros(N)))
    human_torque: Sinusoids = field(default_factory=lambda: Sinusoids.zeros(N))
    constraints: tuple = ()
    constraints_enabled: bool = True
    split_fraction: float = 0.5
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    duration: float = 40.0
    dt: float = 0.001
    substeps: int = 4
    seed: int = 0
    q0: np.ndarray = field(default_factory=lambda: np.zeros(N))
    qdot0: np.ndarray = field(default_factory=lambda: np.zeros(N))
    mode: str = "sampled"
    diagnostics: bool = False
    decimate: int = 1

    def __post_init__(self):
        problems = []
        if self.controller not in ("vdc", "pd"):
            problems.append(f"run.controller must be 'vdc' or 'pd', got {self.controller!r}")
        if not self.dt > 0:
            problems.append(f"run.dt must be > 0, got {self.dt}")
        elif not self.duration >= self.dt:
            problems.append(f"run.duration must be >= dt, got {self.duration}")
        if self.substeps < 1:
            problems.append("run.substeps must be >= 1")
        if self.decimate < 1:
            problems.append("run.decimate must be >= 1")
        if self.mode not in ("sampled", "continuous"):
            problems.append(f"run.mode must be 'sampled' or 'continuous', got {self.mode!r}")
        if self.constraints and len(self.constraints) != self.geometry.n:
            problems.append("constraints must list one entry per joint")
        if not 0 < self.split_fraction < 1:
            problems.append("constraints.split_fraction must lie in (0, 1)")
        if not (np.all(np.isfinite(self.q0)) and np.all(np.isfinite(self.qdot0))):
            problems.append("initial joint state must be finite")
        if problems:
            raise ScenarioError(problems)

    @property
    def steps(self):
        return int(round(self.duration / self.dt))

    def with_overrides(self, **kw):
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


# ---------------------------------------------------------------- loading

class _Reader:
    """Typed access to a parsed TOML table that records problems instead of raising."""

    def __init__(self, data):
        self.data = data
        self.problems = []
        self.used = set()

    def section(self, name):
        sec = self.data.get(name, {})
        if not isinstance(sec, dict):
            self.problems.append(f"[{name}] must be a table")
            return {}
        return sec

    def get(self, sec, key, default, shape=None, kind=float, path=None):
        path = path or key
        table = self.section(sec)
        if key not in table:
            if default is _REQUIRED:
                self.problems.append(f"{sec}.{path} is required")
                return None
            return default
        raw = table[key]
        try:
            if kind is str:
                if not isinstance(raw, str):
                    raise TypeError("expected a string")
                return raw
            if kind is bool:
                if not isinstance(raw, bool):
                    raise TypeError("expected true/false")
                return raw
            if kind is int:
                if isinstance(raw, bool) or not isinstance(raw, int):
                    raise TypeError("expected an integer")
                return raw
            arr = np.array(raw, dtype=float)
            if shape is not None:
                if arr.ndim == 0 and len(shape) >= 1:
                    arr = np.broadcast_to(arr, shape).copy()
                elif arr.shape != shape:
                    raise ValueError(f"expected shape {shape}, got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite value")
            return arr if arr.ndim else float(arr)
        except (TypeError, ValueError) as exc:
            self.problems.append(f"{sec}.{path}: {exc} (value {raw!r})")
            return None


_REQUIRED = object()

KNOWN = {
    "run": {"name", "controller", "duration", "dt", "substeps", "seed", "q0", "qdot0", "mode",
            "diagnostics", "decimate", "gravity"},
    "geometry": {"axes", "joint_rotation", "joint_offset", "link_rotation", "link_offset"},
    "inertia": {"mass", "com", "inertia_com", "human_scale", "human_mass", "human_com",
                "human_inertia_com", "motor_inertia", "human_joint_inertia"},
    "gains": {"lambda", "K_D", "K_I", "Gamma", "gamma1", "gamma2", "k_d", "k_I", "zeta", "beta1",
              "beta2", "k_b_deg", "k_p", "k_v"},
    "trajectory": {"offset", "amplitude", "frequency", "phase"},
    "disturbance": {"amplitude", "frequency", "phase", "link_scale"},
    "human_torque": {"amplitude", "frequency", "phase"},
    "constraints": {"enabled", "k_max", "k_min", "m_right", "m_left", "slope_right", "slope_left",
                    "split_fraction"},
    "estimator": {"n_units", "width", "initial_fraction", "adapt", "body_input_scale",
                  "joint_input_scale"},
}


def _inertia_block(r, prefix, masses_key, com_key, icom_key, n):
    mass = r.get("inertia", masses_key, _REQUIRED, (n,))
    com = r.get("inertia", com_key, _REQUIRED, (n, 3))
    icom = r.get("inertia", icom_key, _REQUIRED, (n, 6))
    if mass is None or com is None or icom is None:
        return None
    phis = []
    for i in range(n):
        Ixx, Iyy, Izz, Ixy, Iyz, Ixz = icom[i]
        Ic = np.array([[Ixx, Ixy, Ixz], [Ixy, Iyy, Iyz], [Ixz, Iyz, Izz]])
        phi = params_from(mass[i], com[i], Ic)
        if not is_physical(phi):
            r.problems.append(f"inertia: {prefix} body {i + 1} is not physically consistent")
        phis.append(phi)
    return np.array(phis)


def parse_scenario(data, source=None):
    """Build a :class:`ScenarioConfig` from a parsed TOML mapping."""
    r = _Reader(data)
    for sec, table in data.items():
        if sec not in KNOWN:
            r.problems.append(f"unknown section [{sec}]")
            continue
        if isinstance(table, dict):
            for key in table:
                if key not in KNOWN[sec]:
                    r.problems.append(f"{sec}.{key}: unknown field")

    # geometry
    axes_raw = r.section("geometry").get("axes", ["z", "z", "z", "z", "x", "z", "y"])
    axes = []
    if not isinstance(axes_raw, list):
        r.problems.append("geometry.axes must be a list of 'x'/'y'/'z'")
    else:
        for i, a in enumerate(axes_raw):
            if a not in AXIS_NAMES:
                r.problems.append(f"geometry.axes[{i}] must be 'x', 'y' or 'z', got {a!r}")
            else:
                axes.append(AXIS_NAMES[a])
    n = len(axes_raw) if isinstance(axes_raw, list) else N
    eye = np.tile(np.eye(3), (n, 1, 1))
    zero3 = np.zeros((n, 3))
    jr = r.get("geometry", "joint_rotation", eye, (n, 3, 3))
    jo = r.get("geometry", "joint_offset", zero3, (n, 3))
    lr = r.get("geometry", "link_rotation", eye, (n, 3, 3))
    lo = r.get("geometry", "link_offset", _REQUIRED, (n, 3))

    robot_phi = _inertia_block(r, "robot", "mass", "com", "inertia_com", n)
    human_scale = r.get("inertia", "human_scale", None)
    if "human_mass" in r.section("inertia"):
        human_phi = _inertia_block(r, "human", "human_mass", "human_com", "human_inertia_com", n)
    elif robot_phi is not None:
        hs = 0.5 if human_scale is None else human_scale
        if hs is not None and hs < 0:
            r.problems.append("inertia.human_scale must be >= 0")
        human_phi = (hs or 0.0) * robot_phi
    else:
        human_phi = None
    motor = r.get("inertia", "motor_inertia", _REQUIRED, (n,))
    human_j = r.get("inertia", "human_joint_inertia", np.zeros(n), (n,))
    if motor is not None and human_j is not None and np.any(motor + human_j <= 0):
        r.problems.append("inertia: motor_inertia + human_joint_inertia must be > 0 for every joint")
    gravity = r.get("run", "gravity", GRAVITY)

    # gains
    g = {}
    for key, attr in (("lambda", "lam"), ("K_D", "K_D"), ("K_I", "K_I"), ("Gamma", "Gamma"),
                      ("gamma1", "gamma1"), ("gamma2", "gamma2"), ("k_d", "k_d"), ("k_I", "k_I"),
                      ("zeta", "zeta"), ("beta1", "beta1"), ("beta2", "beta2"), ("k_p", "k_p"),
                      ("k_v", "k_v")):
        shape = None if key in ("K_D", "K_I", "Gamma", "gamma1", "zeta") else (n,)
        val = r.get("gains", key, None, shape)
        if val is not None:
            g[attr] = val
    kb = r.get("gains", "k_b_deg", 3.0, (n,))
    if kb is not None:
        g["k_b"] = np.deg2rad(kb)

    traj = _sinusoids(r, "trajectory", n, with_offset=True)
    hum = _sinusoids(r, "human_torque", n)
    dist_w = _sinusoids(r, "disturbance", 6)
    link_scale = r.get("disturbance", "link_scale", 1.0, (n,))

    cons_sec = "constraints"
    c_vals = {}
    defaults = {"k_max": [12.0] * 4 + [1.2] * 3, "k_min": [-12.0] * 4 + [-1.2] * 3,
                "m_right": [0.2] * 4 + [0.05] * 3, "m_left": [-0.2] * 4 + [-0.05] * 3,
                "slope_right": 1.0, "slope_left": 1.0}
    for key, dflt in defaults.items():
        c_vals[key] = r.get(cons_sec, key, np.broadcast_to(np.array(dflt, float), (n,)), (n,))
    constraints = ()
    if all(v is not None for v in c_vals.values()):
        cs = []
        for i in range(n):
            try:
                cs.append(ConstraintParams(*(float(c_vals[k][i]) for k in defaults)))
            except ValueError as exc:
                r.problems.append(f"constraints (joint {i + 1}): {exc}")
        constraints = tuple(cs)

    est = EstimatorConfig(
        n_units=r.get("estimator", "n_units", 9, kind=int) or 9,
        width=r.get("estimator", "width", 1.0) or 1.0,
        initial_fraction=r.get("estimator", "initial_fraction", 0.5),
        adapt=r.get("estimator", "adapt", True, kind=bool),
        body_input_scale=_opt_tuple(r.get("estimator", "body_input_scale", None, (25,))),
        joint_input_scale=_opt_tuple(r.get("estimator", "joint_input_scale", None, (6,))),
    )
    if est.initial_fraction is not None and not est.initial_fraction > 0:
        r.problems.append("estimator.initial_fraction must be > 0")

    run = dict(
        name=r.get("run", "name", source.stem if isinstance(source, Path) else "scenario", kind=str),
        controller=r.get("run", "controller", "vdc", kind=str),
        duration=r.get("run", "duration", 40.0),
        dt=r.get("run", "dt", 0.001),
        substeps=r.get("run", "substeps", 4, kind=int),
        seed=r.get("run", "seed", 0, kind=int),
        q0=r.get("run", "q0", np.zeros(n), (n,)),
        qdot0=r.get("run", "qdot0", np.zeros(n), (n,)),
        mode=r.get("run", "mode", "sampled", kind=str),
        diagnostics=r.get("run", "diagnostics", False, kind=bool),
        decimate=r.get("run", "decimate", 1, kind=int),
    )
    enabled = r.get(cons_sec, "enabled", True, kind=bool)
    split = r.get(cons_sec, "split_fraction", 0.5)

    geom = gains = None
    if not r.problems:
        try:
            geom = ChainGeometry(tuple(axes), jr, jo, lr, lo, robot_phi, human_phi, motor, human_j,
                                 gravity)
        except ValueError as exc:
            r.problems.append(f"geometry: {exc}")
        try:
            gains = ControlGains(n=n, **g)
        except ValueError as exc:
            r.problems.append(f"gains: {exc}")
    if r.problems:
        raise ScenarioError(r.problems, source)
    try:
        return ScenarioConfig(
            geometry=geom, gains=gains, trajectory=traj,
            disturbance=DisturbanceSpec(dist_w, link_scale), human_torque=hum,
            constraints=constraints, constraints_enabled=enabled, split_fraction=split,
            estimator=est, **run)
    except ScenarioError as exc:
        raise ScenarioError(exc.problems, source) from None


def _opt_tuple(a):
    return None if a is None else tuple(float(x) for x in a)


def _sinusoids(r, sec, n, with_offset=False):
    z = np.zeros(n)
    off = r.get(sec, "offset", z, (n,)) if with_offset else z
    amp = r.get(sec, "amplitude", z, (n,))
    freq = r.get(sec, "frequency", z, (n,))
    ph = r.get(sec, "phase", z, (n,))
    if any(v is None for v in (off, amp, freq, ph)):
        return Sinusoids.zeros(n)
    return Sinusoids(off, amp, freq, ph)


def load_scenario(path):
    """Read and validate a scenario file."""
    path = Path(path)
    if not path.exists() and (BUNDLED / path.name).exists() and path.parent == Path("."):
        path = BUNDLED / path.name
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError([f"cannot read {path}: {exc.strerror}"], path) from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError([f"parse error: {exc}"], path) from None
    return parse_scenario(data, path)


def bundled(name):
    return BUNDLED / f"{name}.scenario"

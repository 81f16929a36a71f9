"""Peak joint torque needed to follow the reference trajectory under a given disturbance.

Computes exact inverse dynamics along the desired trajectory of a scenario
(including the disturbance wrench on every link) and compares the peak
torque of each joint with its clamp level.  A joint whose requirement
exceeds its clamp cannot track the reference with any controller.

    python scripts/disturbance_feasibility.py [scenario ...] [--duration 10]
"""
import argparse
from pathlib import Path

import numpy as np

from vdcexo import _plant
from vdcexo.scenario import bundled, load_scenario
from vdcexo.sim import desired_at


def required_torques(cfg, times):
    geom = cfg.geometry
    args = geom.kernel_args()
    out = np.empty((len(times), geom.n))
    for i, t in enumerate(times):
        des = desired_at(cfg, t)
        _, wrench_at_joint = _plant.inverse_sweep(*args, geom.phi, des.q, des.qdot, des.qddot,
                                                  cfg.disturbance.value(t), geom.g_world)
        out[i] = (np.einsum("ki,ki->k", geom.mu, wrench_at_joint)
                  + geom.joint_inertia * des.qddot + cfg.human_torque.value(t))
    return out


def report(cfg, duration, step):
    times = np.arange(0.0, duration, step)
    limits = np.array([p.upper for p in cfg.constraints])
    peak = np.abs(required_torques(cfg, times)).max(axis=0)
    print(f"{cfg.name}: link_scale={cfg.disturbance.link_scale.tolist()}")
    print(f"{'joint':>5} {'peak |tau| [N m]':>18} {'clamp [N m]':>12} {'ratio':>7}")
    for j, (p, lim) in enumerate(zip(peak, limits)):
        flag = "  infeasible" if p >= lim else ""
        print(f"{j + 1:>5} {p:>18.4f} {lim:>12.3f} {p / lim:>7.3f}{flag}")
    return bool(np.all(peak < limits))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("scenario", nargs="*", type=Path)
    parser.add_argument("--duration", type=float, default=10.0)
    parser.add_argument("--step", type=float, default=0.002)
    args = parser.parse_args()
    paths = args.scenario or [bundled("default_sim"), bundled("full_disturbance")]
    for path in paths:
        feasible = report(load_scenario(path), args.duration, args.step)
        print("feasible\n" if feasible else "not feasible within the clamp levels\n")


if __name__ == "__main__":
    main()

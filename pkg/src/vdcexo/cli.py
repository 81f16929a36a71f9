"""Command-line entry point: run scenarios and write logs, metrics and plot data.

Layout of ``--out`` for one scenario and one controller::

    log.csv  metrics.txt  plotdata/{tracking_error,e_a,torque,estimator_norms}.csv

With ``--controller both`` each controller gets a subdirectory and
``metrics.txt`` at the top holds one table with a column per controller.
Several ``--scenario`` flags put each scenario under ``<out>/<name>/``.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .scenario import ScenarioError, bundled, load_scenario
from .sim import SimLog, SimulationAbort, metrics, run

OUT_ENV = "VDCEXO_OUT"
TELESCOPE_LIMIT = 1e-9

PLOT_GROUPS = {
    "tracking_error": ("e",),
    "e_a": ("e_a",),
    "torque": ("tau_cmd", "tau_app"),
    "estimator_norms": ("W_body", "eps_body", "phi_body", "W_joint", "eps_joint", "phi_joint"),
}


@dataclass(frozen=True)
class RunRequest:
    scenario: Path
    controller: str = "vdc"
    duration: float | None = None
    dt: float | None = None
    out: Path = Path("runs")
    seed: int | None = None
    diagnostics: bool = False
    decimate: int | None = None

    def __post_init__(self):
        if self.controller not in ("vdc", "pd", "both"):
            raise ValueError(f"controller must be vdc, pd or both, got {self.controller!r}")
        if self.decimate is not None and self.decimate < 1:
            raise ValueError("decimate must be >= 1")


@dataclass
class RunResult:
    name: str
    controller: str
    out: Path
    metrics: list | None
    error: str | None = None


def write_plotdata(log, directory):
    directory.mkdir(parents=True, exist_ok=True)
    t = log.t[:, None]
    for fname, prefixes in PLOT_GROUPS.items():
        cols = [c for c in log.columns if c.rsplit("_", 1)[0] in prefixes
                and c.rsplit("_", 1)[-1].isdigit()]
        idx = [log.columns.index(c) for c in cols]
        sub = SimLog(["t", *cols], ["s", *[log.units[i] for i in idx]],
                     np.hstack([t, log.data[:, idx]]))
        sub.write_csv(directory / f"{fname}.csv")


def write_metrics(path, table):
    """``table`` maps controller -> list of (name, value); rows are aligned by name."""
    ctrls = list(table)
    names = []
    for rows in table.values():
        for name, _ in rows or ():
            if name not in names:
                names.append(name)
    width = max([len(n) for n in names] + [6])
    lines = [f"{'metric':<{width}}  " + "  ".join(f"{c:>22}" for c in ctrls)]
    for name in names:
        vals = []
        for c in ctrls:
            d = dict(table[c] or ())
            vals.append(f"{d[name]:>22.12g}" if name in d else f"{'-':>22}")
        lines.append(f"{name:<{width}}  " + "  ".join(vals))
    path.write_text("\n".join(lines) + "\n")


def _check_invariants(log):
    rel = log.col("telescope_rel")
    if len(rel) and np.nanmax(rel) >= TELESCOPE_LIMIT:
        k = int(np.nanargmax(rel))
        return f"telescoping residual {rel[k]:.3g} (relative) at t={log.t[k]:.3f} s"
    eigs = log.group("min_eig")
    if eigs.size and np.any(eigs <= 0):
        k = int(np.argmax(np.any(eigs <= 0, axis=1)))
        return f"parameter estimate not positive definite at t={log.t[k]:.3f} s"
    return None


def _run_one(cfg, controller, out):
    cfg = cfg.with_overrides(controller=controller)
    out.mkdir(parents=True, exist_ok=True)
    try:
        log = run(cfg)
    except SimulationAbort as exc:
        if exc.log is not None:
            exc.log.write_csv(out / "log.csv")
        return RunResult(cfg.name, controller, out, None, exc.reason)
    log.write_csv(out / "log.csv")
    write_plotdata(log, out / "plotdata")
    m = metrics(log, cfg.gains.k_b)
    rows = m.as_rows() + [("steps", float(len(log.data)))]
    if controller == "vdc":
        rows.append(("max_telescope_rel", float(log.meta.get("max_telescope_rel", 0.0))))
        rows.append(("nal_halvings", float(log.meta.get("nal_halvings", 0))))
    return RunResult(cfg.name, controller, out, rows, _check_invariants(log))


def run_command(req):
    """Run one request; returns ``(exit_status, [RunResult])``."""
    cfg = load_scenario(req.scenario).with_overrides(
        duration=req.duration, dt=req.dt, seed=req.seed, decimate=req.decimate,
        diagnostics=req.diagnostics or None)
    ctrls = ["vdc", "pd"] if req.controller == "both" else [req.controller]
    results = []
    for c in ctrls:
        sub = req.out / c if len(ctrls) > 1 else req.out
        results.append(_run_one(cfg, c, sub))
    if len(ctrls) > 1:
        write_metrics(req.out / "metrics.txt", {r.controller: r.metrics for r in results})
    for r in results:
        if r.metrics is not None:
            write_metrics(r.out / "metrics.txt", {r.controller: r.metrics})
    status = 0 if all(r.error is None for r in results) else 1
    return status, results


def _run_request(req):
    try:
        return run_command(req)
    except ScenarioError as exc:
        return 2, [RunResult(str(req.scenario), req.controller, req.out, None, str(exc))]


def build_parser():
    p = argparse.ArgumentParser(prog="vdcexo", description=__doc__.splitlines()[0])
    p.add_argument("--scenario", action="append", type=Path,
                   help="scenario file (repeatable); default: bundled default_sim")
    p.add_argument("--controller", choices=("vdc", "pd", "both"), default=None,
                   help="override the scenario's controller")
    p.add_argument("--duration", type=float, help="simulated time [s]")
    p.add_argument("--dt", type=float, help="control period [s]")
    p.add_argument("--out", type=Path,
                   help=f"output directory (default: ${OUT_ENV} or ./runs, plus the scenario name)")
    p.add_argument("--seed", type=int, help="seed for the network centres")
    p.add_argument("--diagnostics", action="store_true",
                   help="log accompanying functions and dissipation")
    p.add_argument("--decimate", type=int, help="log every n-th control step")
    p.add_argument("--jobs", type=int, default=1, help="scenario files run in parallel")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.decimate is not None and args.decimate < 1:
        print("error: --decimate must be >= 1", file=sys.stderr)
        return 2
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 2
    scenarios = args.scenario or [bundled("default_sim")]
    root = args.out or Path(os.environ.get(OUT_ENV, "runs"))
    reqs = []
    for path in scenarios:
        if args.out is not None and len(scenarios) == 1:
            out = root
        else:
            out = root / Path(path).stem
        try:
            ctrl = args.controller or load_scenario(path).controller
        except ScenarioError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        reqs.append(RunRequest(Path(path), ctrl, args.duration, args.dt, out, args.seed,
                               args.diagnostics, args.decimate))
    if args.jobs > 1 and len(reqs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_run_request, reqs))
    else:
        outcomes = [_run_request(r) for r in reqs]

    status = 0
    for st, results in outcomes:
        status = max(status, st)
        for r in results:
            if r.error is None:
                print(f"{r.name} [{r.controller}]: ok -> {r.out}")
            else:
                print(f"{r.name} [{r.controller}]: {r.error}", file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())

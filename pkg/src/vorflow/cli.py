"""Command-line driver: run simulations, write diagnostics, convergence studies.

Exit codes: 0 on success, 2 on configuration errors, 3 on solver failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bench
from .errors import VorflowError, UnknownScenario
from .io import DiagnosticsWriter, RunConfig, parse_config, write_snapshot
from .remap import phase_totals

CONVERGENCE_SCHEMA = "vorflow-convergence-v1"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="vorflow",
                                     description="quasi-Lagrangian Voronoi flow solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario from a config file")
    p_run.add_argument("config", help="INI config with a [run] section")
    p_run.add_argument("--out", default=None, help="output directory override")
    p_run.add_argument("--seed", type=int, default=None, help="jitter RNG seed override")

    p_conv = sub.add_parser("converge", help="resolution sweep with error norms")
    p_conv.add_argument("config")
    p_conv.add_argument("--resolutions", required=True,
                        help="comma-separated seeds-per-reference-length list")
    p_conv.add_argument("--out", default=None)

    sub.add_parser("list-scenarios", help="print available scenarios")

    args = parser.parse_args(argv)
    threads = os.environ.get("VORFLOW_THREADS")
    if threads:
        try:
            import numba
            numba.set_num_threads(max(1, int(threads)))
        except (ImportError, ValueError):
            pass

    try:
        if args.command == "list-scenarios":
            return cmd_list()
        if args.command == "run":
            return cmd_run(args)
        return cmd_converge(args)
    except (UnknownScenario, FileNotFoundError, ValueError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2
    except VorflowError as ex:
        print(f"solver failure: {ex}", file=sys.stderr)
        return 3


def cmd_list() -> int:
    for name in bench.SCENARIO_NAMES:
        scn = bench.build_scenario(name, 8)
        print(f"{name:18s} {scn.description}")
    return 0


def _diag_record(sim, scn, dt) -> dict:
    totals = phase_totals(sim.state)
    rec = {
        "time": sim.t,
        "dt": dt,
        "mass_phase0": totals[0, 0],
        "mass_phase1": totals[1, 0],
        "momentum_x": totals[:, 1].sum(),
        "momentum_y": totals[:, 2].sum(),
        "energy_total": totals[:, 3].sum(),
        "q_mesh": sim.q_mesh,
        "n_remaps": sim.n_remaps,
    }
    rec.update(bench.observables(scn, sim))
    return rec


def _snapshot_fields(sim) -> dict:
    st = sim.state
    return {
        "density": st.rho,
        "velocity_magnitude": np.hypot(st.v[:, 0], st.v[:, 1]),
        "pressure": st.p,
        "color": st.C.astype(float),
        "schlieren": bench.schlieren(sim),
    }


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if args.out is not None:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    scn = bench.build_scenario(cfg.scenario, cfg.resolution, jitter=cfg.jitter)
    t_end = cfg.t_end if cfg.t_end is not None else scn.t_end
    try:
        sim = bench.init_simulation(scn, seed=cfg.seed, overrides=cfg.controls)
    except VorflowError as ex:
        _error_report(out, cfg, str(ex))
        print(f"solver failure: {ex}", file=sys.stderr)
        return 3

    cadence = cfg.snapshot_every if cfg.snapshot_every > 0 else 50
    nstep = 0
    nsnap = 0

    def save_snapshot():
        nonlocal nsnap
        write_snapshot(out / f"snapshot_{nsnap:05d}.vtk", sim.mesh,
                       _snapshot_fields(sim), title=f"{scn.name} t={sim.t!r}")
        nsnap += 1

    with DiagnosticsWriter(out / "diagnostics.csv") as diag:
        save_snapshot()
        try:
            while sim.t < t_end - 1e-12 * max(t_end, 1.0):
                saved = sim.controls.dt_max
                sim.controls.dt_max = min(saved, t_end - sim.t)
                try:
                    dt = sim.step()
                finally:
                    sim.controls.dt_max = saved
                nstep += 1
                diag.write(_diag_record(sim, scn, dt))
                if nstep % cadence == 0:
                    save_snapshot()
        except VorflowError as ex:
            _error_report(out, cfg, str(ex), t=sim.t, step=nstep)
            print(f"solver failure at t={sim.t:g}: {ex}", file=sys.stderr)
            return 3
        save_snapshot()
    print(f"{scn.name}: {nstep} steps to t={sim.t:g}, {sim.n_remaps} remaps, "
          f"outputs in {out}")
    return 0


def _error_report(out: Path, cfg: RunConfig, message: str, **extra) -> None:
    report = {"scenario": cfg.scenario, "resolution": cfg.resolution,
              "seed": cfg.seed, "error": message}
    report.update(extra)
    with open(out / "error.json", "w") as fh:
        json.dump(report, fh, indent=2)


def cmd_converge(args) -> int:
    cfg = parse_config(args.config)
    if args.out is not None:
        cfg.out_dir = args.out
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    resolutions = [int(r) for r in args.resolutions.split(",") if r.strip()]
    if not resolutions:
        raise ValueError("no resolutions given")

    probe = bench.build_scenario(cfg.scenario, resolutions[0], jitter=cfg.jitter)
    if probe.oracle is None:
        raise ValueError(f"scenario {cfg.scenario!r} has no analytic oracle; "
                         "convergence studies need circular_patch")

    rows = []
    for res in resolutions:
        scn = bench.build_scenario(cfg.scenario, res, jitter=cfg.jitter)
        t_end = cfg.t_end if cfg.t_end is not None else scn.t_end
        sim = bench.init_simulation(scn, seed=cfg.seed, overrides=cfg.controls)
        sim.run(t_end)
        obs = bench.observables(scn, sim)
        rows.append((res, scn.dx, obs["err_v_l2"], obs["err_p_l2"]))
        print(f"resolution {res:4d}: h={scn.dx:.5g} err_v={obs['err_v_l2']:.6g} "
              f"err_p={obs['err_p_l2']:.6g}")

    order_v = _fit_order([r[1] for r in rows], [r[2] for r in rows])
    order_p = _fit_order([r[1] for r in rows], [r[3] for r in rows])
    with open(out / "convergence.csv", "w") as fh:
        fh.write(f"# schema: {CONVERGENCE_SCHEMA}\n")
        fh.write("resolution,h,err_v_l2,err_p_l2\n")
        for res, h, ev, ep in rows:
            fh.write(f"{res},{h!r},{ev!r},{ep!r}\n")
    ov = f"{order_v:.3f}" if order_v is not None else "n/a"
    op = f"{order_p:.3f}" if order_p is not None else "n/a"
    print(f"observed order: velocity {ov}, pressure {op}")
    return 0


def _fit_order(h, err):
    """Least-squares slope of log(err) against log(h); None for single points."""
    if len(h) < 2:
        return None
    return float(np.polyfit(np.log(np.asarray(h)), np.log(np.asarray(err)), 1)[0])


if __name__ == "__main__":
    sys.exit(main())

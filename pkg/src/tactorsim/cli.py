"""Command line front end: workspace rasters, pattern tables, the trial
protocol, the teleop server, and session replay."""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .config import FINGERS, load_config
from .device import CONTROL_DT
from .geometry import KinematicsError, compute_workspace
from .patterns import PatternKind, default_spec, sample_pattern
from .service import TeleopServer, replay_command_log
from .trials import (CONDITIONS, Condition, OperatorParams, aggregate,
                     run_protocol, write_results_csv, write_summary_json)

_KINDS = {"stretch": PatternKind.STRETCHING,
          "slip": PatternKind.SLIPPING,
          "twist": PatternKind.TWISTING}


def cmd_workspace(args) -> int:
    rig = load_config(args.config)
    st = rig.stations[args.finger]
    grid = compute_workspace(st.lower, st.upper, args.resolution, st.ellipse)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x_mm", "y_mm", "lower", "upper", "both"])
        for ix in range(grid.nx):
            for iy in range(grid.ny):
                x, y = grid.cell_center(ix, iy)
                w.writerow([f"{x:.3f}", f"{y:.3f}",
                            int(grid.lower[ix, iy]), int(grid.upper[ix, iy]),
                            int(grid.both[ix, iy])])
    n_in, n_ok = grid.ellipse_cells_covered()
    print(f"{args.finger}: intersection area {grid.intersection_area_mm2():.1f} mm^2 "
          f"at {args.resolution:g} mm, ellipse coverage {n_ok}/{n_in} cells")
    return 0


def cmd_patterns(args) -> int:
    rig = load_config(args.config)
    st = rig.stations[args.finger]
    spec = default_spec(_KINDS[args.kind], st.ellipse.center)
    n = max(2, round(spec.duration * args.rate) + 1)
    pairs = sample_pattern(spec, n, st.ellipse)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s", "up_x_mm", "up_y_mm", "lo_x_mm", "lo_y_mm"])
        for p in pairs:
            w.writerow([f"{p.t:.6f}", f"{p.upper.x:.6f}", f"{p.upper.y:.6f}",
                        f"{p.lower.x:.6f}", f"{p.lower.y:.6f}"])
    print(f"{args.kind} on {args.finger}: {n} samples over {spec.duration:g} s "
          f"at {args.rate:g} Hz -> {args.out}")
    return 0


def cmd_run_trials(args) -> int:
    rig = load_config(args.config)
    try:
        conditions = [Condition.parse(s) for s in args.conditions.split(",") if s]
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    params = OperatorParams.from_config(rig.operator)
    traces: list[tuple] = []

    def hook(cfg):
        trace: list = []
        traces.append((cfg, trace))
        return trace

    results = run_protocol(args.seed, conditions, params,
                           rig.harness, rig.physics,
                           trace_hook=hook if args.pivot_log else None)
    write_results_csv(args.out, results)
    summary = aggregate(results)
    summary_path = args.summary or str(Path(args.out).with_name("summary.json"))
    write_summary_json(summary_path, summary)

    if args.pivot_log:
        log_dir = Path(args.pivot_log)
        log_dir.mkdir(parents=True, exist_ok=True)
        for cfg, trace in traces:
            label = cfg.condition.label.replace("+", "_")
            with open(log_dir / f"{label}_{cfg.trial_index:02d}.csv",
                      "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["t", "theta_deg", "omega", "F_n", "mode", "aperture"])
                for t, th, om, fn, mode, ap in trace:
                    w.writerow([f"{t:.2f}", f"{th:.6f}", f"{om:.6f}",
                                f"{fn:.6f}", mode, f"{ap:.6f}"])

    for label, stats in summary["by_condition"].items():
        print(f"{label}: {stats.successes}/{stats.n} success, "
              f"mean time {stats.mean_time_s:.2f} s, "
              f"mean |err| {stats.mean_abs_error_deg:.2f} deg")
    overall = summary["overall"]
    print(f"overall: {overall.successes}/{overall.n} "
          f"({overall.success_ratio_pct:.1f}%) -> {args.out}, {summary_path}")
    return 0


def cmd_serve(args) -> int:
    rig = load_config(args.config)
    try:
        condition = Condition.parse(args.condition)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    max_ticks = (None if args.duration is None
                 else max(1, round(args.duration / CONTROL_DT)))
    server = TeleopServer(rig, seed=args.seed, condition=condition,
                          host=args.host, port=args.port, speed=args.speed,
                          ui_dir=args.ui_dir, record_path=args.record,
                          max_ticks=max_ticks, device_log=args.device_log)
    server.start()
    print(f"serving on {server.host}:{server.port} "
          f"(seed {args.seed}, {condition.label}, {args.speed} speed)")
    try:
        server.wait()
    except KeyboardInterrupt:
        print("\nstopping")
    finally:
        server.stop()
    return 0


def cmd_replay(args) -> int:
    sim = replay_command_log(args.log, load_config(args.config))
    if args.out:
        sim.write_results_csv(args.out)
    print(f"replayed {sim.tick_count} ticks, {len(sim.results)} trial results"
          + (f" -> {args.out}" if args.out else ""))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tactorsim",
                                description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    w = sub.add_parser("workspace", help="raster both mechanisms' reachability")
    w.add_argument("--finger", choices=FINGERS, required=True)
    w.add_argument("--resolution", type=float, required=True, metavar="MM")
    w.add_argument("--out", required=True)
    w.add_argument("--config", default=None)
    w.set_defaults(fn=cmd_workspace)

    pt = sub.add_parser("patterns", help="tabulate a skin deformation pattern")
    pt.add_argument("--kind", choices=sorted(_KINDS), required=True)
    pt.add_argument("--finger", choices=FINGERS, required=True)
    pt.add_argument("--rate", type=float, required=True, metavar="HZ")
    pt.add_argument("--out", required=True)
    pt.add_argument("--config", default=None)
    pt.set_defaults(fn=cmd_patterns)

    rt = sub.add_parser("run-trials", help="run the scripted pivoting protocol")
    rt.add_argument("--conditions",
                    default=",".join(c.label for c in CONDITIONS),
                    help="comma-separated feedback condition labels")
    rt.add_argument("--operator", choices=("scripted",), default="scripted")
    rt.add_argument("--seed", type=int, default=0)
    rt.add_argument("--out", default="results.csv")
    rt.add_argument("--summary", default=None,
                    help="summary JSON path (default: summary.json next to --out)")
    rt.add_argument("--pivot-log", default=None, metavar="DIR",
                    help="write per-trial physics tick logs into DIR")
    rt.add_argument("--config", default=None)
    rt.set_defaults(fn=cmd_run_trials)

    sv = sub.add_parser("serve", help="run the teleop session server")
    sv.add_argument("--port", type=int, default=7643)
    sv.add_argument("--host", default="127.0.0.1")
    sv.add_argument("--seed", type=int, default=0)
    sv.add_argument("--condition", default="VF")
    sv.add_argument("--config", default=None)
    sv.add_argument("--speed", choices=("real", "fast"), default="real")
    sv.add_argument("--duration", type=float, default=None, metavar="S",
                    help="stop after this much simulated time")
    sv.add_argument("--ui-dir", default=None,
                    help="serve static web assets from this directory")
    sv.add_argument("--record", default=None, metavar="JSONL",
                    help="write the session command log on shutdown")
    sv.add_argument("--device-log", default=None, metavar="CSV",
                    help="stream per-tick device state to CSV")
    sv.set_defaults(fn=cmd_serve)

    rp = sub.add_parser("replay", help="re-run a recorded session")
    rp.add_argument("--log", required=True, metavar="JSONL")
    rp.add_argument("--out", default=None, metavar="CSV")
    rp.add_argument("--config", default=None)
    rp.set_defaults(fn=cmd_replay)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except KinematicsError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface.

Subcommands mirror the experiment stages: simulate (dump observations and
feature trajectories), calibrate (one trial, printed), sweep (Monte Carlo
with CSV/SVG report), crb (bounds table), geometry (projection dataset),
report (regenerate the SVG from an existing CSV).

Exit codes: 0 success, 2 configuration error, 3 all trials failed.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigurationError
from .featext import feature_trajectories
from .harness import geometry_report, monte_carlo, run_trial
from .report import emit_report, read_sweep_csv, write_sweep_svg
from .scene import synthesize_observations

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ALL_FAILED = 3


def _cmd_simulate(args) -> int:
    config = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scene = config.scene
    obs = synthesize_observations(scene)
    obs.save(str(out / "observation"))
    trajs = feature_trajectories(
        obs, scene.waveform, window=config.features.window,
        use_tangent=config.features.use_tangent, hop_guard_s=config.features.hop_guard_s,
    )
    for i, traj in enumerate(trajs, start=2):
        traj.to_csv(str(out / f"trajectory_node{i}.csv"))
    print(f"wrote observation + {len(trajs)} trajectories to {out}")
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    config = load_config(args.config)
    rec = run_trial(
        config.scene, args.method, config.features, config.twme,
        boundary_probe=config.boundary_probe,
    )
    if rec.failed:
        print(f"trial failed: {rec.error}", file=sys.stderr)
        return EXIT_ALL_FAILED
    print("node,dT_true_ns,dT_est_ns,gamma_true_rad,gamma_est_rad,gamma_est_mod_pi,cycle_slip")
    for i, node in enumerate(rec.node_ids):
        g = rec.gamma_est_rad[i]
        g_mod_pi = g - math.pi * round(g / math.pi)
        print(
            f"{node},{rec.dt_true_s[i] * 1e9:.6f},{rec.dt_est_s[i] * 1e9:.6f},"
            f"{rec.gamma_true_rad[i]:.6f},{g:.6f},{g_mod_pi:.6f},{int(rec.cycle_slip)}"
        )
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    result = monte_carlo(config)
    out = args.out or config.output_dir
    if out is None:
        raise ConfigurationError("sweep needs --out or sweep.output_dir")
    csv_path, svg_path = emit_report(result, out)
    print(f"wrote {csv_path} and {svg_path}")
    if all(p.trials_ok == 0 for p in result.points):
        print("every trial failed", file=sys.stderr)
        return EXIT_ALL_FAILED
    return EXIT_OK


def _cmd_crb(args) -> int:
    from .harness import _crb_for_point, apply_sweep_value

    config = load_config(args.config)
    print(f"{config.sweep_axis},crb_clock_ns,crb_phase_deg")
    for value in config.sweep_values:
        scene_v = apply_sweep_value(config.scene, config.sweep_axis, value)
        clock, phase = _crb_for_point(scene_v, config.features)
        print(f"{value:.9g},{clock * 1e9:.9g},{math.degrees(phase):.9g}")
    return EXIT_OK


def _cmd_geometry(args) -> int:
    config = load_config(args.config)
    report = geometry_report(config.scene, config.features)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.to_csv(str(out / "geometry_node2.csv"))
    with open(out / "geometry_diagnostics.txt", "w", encoding="utf-8") as fh:
        fh.write(f"r2_line = {report.r2_line!r}\n")
        fh.write(f"rms_line_rad = {report.rms_line_rad!r}\n")
        fh.write(f"rms_plane_rad = {report.rms_plane_rad!r}\n")
        fh.write(f"cluster_count = {report.cluster_count!r}\n")
    print(f"wrote geometry dataset and diagnostics to {out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    csv_path = Path(args.input) / "sweep.csv"
    result = read_sweep_csv(csv_path)
    svg_path = Path(args.input) / "sweep.svg"
    write_sweep_svg(result, svg_path)
    print(f"regenerated {svg_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ghrsync",
        description="joint clock/RF-phase calibration experiments on simulated networks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize observations and dump feature trajectories")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("calibrate", help="run a single calibration trial and print the result")
    p.add_argument("--config", required=True)
    p.add_argument("--method", default="ghr", choices=("ghr", "ghr_fast", "gcc", "twme"))
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("sweep", help="run the configured Monte Carlo sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("crb", help="print the bound table over the sweep values")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_crb)

    p = sub.add_parser("geometry", help="emit the frequency/phase projection dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_geometry)

    p = sub.add_parser("report", help="regenerate sweep.svg from an existing sweep.csv")
    p.add_argument("--in", dest="input", required=True)
    p.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

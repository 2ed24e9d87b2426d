"""Command-line front end.

Subcommands:
    simulate  run a drift scenario, write frame log / event log / summary
    refine    refine a calibration triple file, print per-iteration residuals
    losses    evaluate the loss report for a predicted vs ground-truth triple
    project   convert a point-cloud file to depth and BEV graymaps
    bench     time the cost-volume kernel across displacement radii

Exit codes: 0 success, 1 runtime failure, 2 usage or config error. Output
files are written atomically (temp file + rename): they either appear
complete or not at all. The default output directory comes from
``TRICALIB_OUT_DIR`` (falling back to the working directory).
"""

from __future__ import annotations

import argparse
import logging
import os
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, load_scenario, resolve_config_path
from .costvolume import FeatureGrid, backend_names, build_cost_volume
from .losses import LossReport, LossWeights, evaluate_losses
from .monitor import write_event_log
from .projection import (
    BevConfig,
    CameraIntrinsics,
    camera_to_bev_axes,
    project_to_depth_image,
    rasterize_bev,
    read_cloud,
    write_pgm,
)
from .refiner import MpnConfig, read_triple, refine_with_history, write_triple
from .se3 import format_transform
from .simulate import run_scenario

logger = logging.getLogger("tricalib")

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("TRICALIB_OUT_DIR") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_simulate(args) -> int:
    try:
        config_path = resolve_config_path(args.config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        spec = load_scenario(config_path)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    scenario = spec.scenario
    if args.seed is not None:
        from dataclasses import replace

        scenario = replace(scenario, seed=args.seed)
    result = run_scenario(scenario, spec.monitor, spec.mpn)

    out = _out_dir(args)
    stem = config_path.stem
    _atomic_write(out / f"{stem}_frames.csv", result.frame_log_csv())
    write_event_log(out / f"{stem}_events.log", result.updates)
    summary_text = "\n".join(result.summary.lines()) + "\n"
    _atomic_write(out / f"{stem}_summary.txt", summary_text)
    print(summary_text, end="")
    logger.info("wrote %s_{frames.csv,events.log,summary.txt} under %s", stem, out)
    return EXIT_OK


def cmd_refine(args) -> int:
    try:
        triple = read_triple(args.input)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    cfg = MpnConfig(iterations=args.iterations, alphas=(args.alpha,) * args.iterations)
    refined, history = refine_with_history(triple, cfg)
    print("iteration,rot_residual_deg,trans_residual_m")
    for i, res in enumerate(history):
        print(f"{i},{res.rotation_deg:.9g},{res.translation_m:.9g}")
    print("refined triple (lidar_cam, radar_cam, lidar_radar):")
    for name, t in refined.items():
        print(f"{name}: {format_transform(t)}")
    if args.out:
        out = _out_dir(args)
        write_triple(out / "refined_triple.txt", refined, header=["refined calibration triple"])
    return EXIT_OK


def cmd_losses(args) -> int:
    try:
        pred = read_triple(args.pred)
        gt = read_triple(args.gt)
        intermediate = read_triple(args.intermediate) if args.intermediate else None
        init = read_triple(args.init) if args.init else None
        clouds = None
        if args.lidar_cloud or args.radar_cloud:
            if not (args.lidar_cloud and args.radar_cloud and args.init):
                print(
                    "error: cloud loss needs --lidar-cloud, --radar-cloud and --init together",
                    file=sys.stderr,
                )
                return EXIT_USAGE
            clouds = (read_cloud(args.lidar_cloud), read_cloud(args.radar_cloud))
        weights = LossWeights(
            lambda_r=args.lambda_r,
            lambda_t=args.lambda_t,
            lambda_c=args.lambda_c,
            lambda_l=args.lambda_l,
            gamma=args.gamma,
        )
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = evaluate_losses(pred, gt, weights, intermediate=intermediate, clouds=clouds, init=init)
    print(LossReport.CSV_HEADER)
    print(report.csv_row())
    if args.out:
        _atomic_write(_out_dir(args) / "losses.csv", f"{LossReport.CSV_HEADER}\n{report.csv_row()}\n")
    return EXIT_OK


def cmd_project(args) -> int:
    try:
        cloud = read_cloud(args.cloud)
        intrinsics = CameraIntrinsics(
            fx=args.fx, fy=args.fy, cx=args.cx, cy=args.cy, width=args.width, height=args.height
        )
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    depth = project_to_depth_image(cloud, intrinsics)
    bev = rasterize_bev(camera_to_bev_axes(cloud), BevConfig())
    out = _out_dir(args)
    stem = Path(args.cloud).stem
    write_pgm(out / f"{stem}_depth.pgm", depth.display_grid())
    write_pgm(out / f"{stem}_bev.pgm", bev.heights)
    print(f"points={len(cloud)} depth_occupied={depth.occupied_count()} bev_occupied={bev.occupied_count()}")
    return EXIT_OK


def cmd_bench(args) -> int:
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    a = FeatureGrid(rng.normal(size=(args.channels, 8, 16)))
    b = FeatureGrid(rng.normal(size=(args.channels, 8, 16)))
    backends = backend_names()
    header = "d,channels," + ",".join(f"{name}_ms" for name in backends)
    rows = [header]
    print(header)
    for d in range(1, args.d_max + 1):
        cells = [str(d), str((2 * d + 1) ** 2)]
        for name in backends:
            build_cost_volume(a, b, d, backend=name)  # warm-up
            times = []
            for _ in range(args.reps):
                t0 = time.perf_counter()
                build_cost_volume(a, b, d, backend=name)
                times.append((time.perf_counter() - t0) * 1e3)
            cells.append(f"{statistics.median(times):.6g}")
        row = ",".join(cells)
        rows.append(row)
        print(row)
    if args.out:
        _atomic_write(_out_dir(args) / "bench.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tricalib",
        description="Extrinsic-calibration toolkit for LiDAR/RADAR/camera rigs.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a drift scenario config")
    p.add_argument("--config", required=True, help="scenario file path or bundled name (e.g. no_drift)")
    p.add_argument("--out", help="output directory (default: $TRICALIB_OUT_DIR or .)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("refine", help="refine a calibration triple file")
    p.add_argument("--input", required=True, help="triple file (three transform records)")
    p.add_argument("--iterations", type=int, default=4)
    p.add_argument("--alpha", type=float, default=0.5, help="blend weight kept on the current node")
    p.add_argument("--out", help="also write refined_triple.txt here")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("losses", help="evaluate the loss report for a frame")
    p.add_argument("--pred", required=True, help="predicted triple file")
    p.add_argument("--gt", required=True, help="ground-truth triple file")
    p.add_argument("--intermediate", help="pre-refinement triple for the accuracy penalty")
    p.add_argument("--init", help="initial triple (needed for cloud loss)")
    p.add_argument("--lidar-cloud", help="LiDAR point-cloud file")
    p.add_argument("--radar-cloud", help="RADAR point-cloud file")
    p.add_argument("--lambda-r", type=float, default=1.0, dest="lambda_r")
    p.add_argument("--lambda-t", type=float, default=1.0, dest="lambda_t")
    p.add_argument("--lambda-c", type=float, default=0.1, dest="lambda_c")
    p.add_argument("--lambda-l", type=float, default=0.1, dest="lambda_l")
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--out", help="also write losses.csv here")
    p.set_defaults(func=cmd_losses)

    p = sub.add_parser("project", help="point cloud to depth + BEV graymaps")
    p.add_argument("--cloud", required=True, help="point-cloud file (text or binary)")
    p.add_argument("--fx", type=float, default=500.0)
    p.add_argument("--fy", type=float, default=500.0)
    p.add_argument("--cx", type=float, default=320.0)
    p.add_argument("--cy", type=float, default=240.0)
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("bench", help="time the cost-volume kernel per displacement radius")
    p.add_argument("--d", type=int, default=6, dest="d_max", help="largest displacement radius")
    p.add_argument("--reps", type=int, default=5, help="repetitions per point (median reported)")
    p.add_argument("--channels", type=int, default=64, help="feature channels of the synthetic grids")
    p.add_argument("--seed", type=int, help="seed for the synthetic grids")
    p.add_argument("--out", help="also write bench.csv here")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # runtime failure, not usage
        logger.debug("unhandled failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

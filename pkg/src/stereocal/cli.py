"""Command-line surface for the calibration pipeline.

Subcommands: detect, calibrate, sensitivity, refine, rectify,
convert-features, eval, synth. Exit codes: 0 success, 1 usage error,
2 data error, 3 numerical failure. All randomness funnels through --seed
(default 0); reruns with identical flags produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import kittiio, report, synth
from .boardfinder import detect_boards
from .calibrate import (
    FREEZABLE,
    calibrate_boards,
    match_boards,
    sensitivity_sweep,
)
from .cameramodel import (
    Intrinsics,
    RectifiedCalibration,
    convert_feature,
    rectification_map,
    remap,
)
from .errors import DataError, InvalidInputError, NumericalError, RunnerError
from .refine import (
    AxisSpec,
    ExternalCommandRunner,
    GridSpec,
    grid_search,
    kitti_error,
    score_table_csv,
)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse parser whose usage failures exit with code 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


def _parse_image_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as e:
        raise _UsageError(f"--image-size expects WxH, got {text!r}") from e


def _parse_fix(text: str) -> dict[str, float | None]:
    """Parse --fix 'fx=980,baseline' into a frozen-parameter mapping.

    A bare name freezes the parameter at its initialized value.
    """
    out: dict[str, float | None] = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        name, _, value = item.partition("=")
        name = name.strip()
        if name not in FREEZABLE:
            raise _UsageError(
                f"--fix parameter must be one of {FREEZABLE}, got {name!r}")
        try:
            out[name] = float(value) if value else None
        except ValueError as e:
            raise _UsageError(f"--fix {item!r}: {e}") from e
    return out


def _parse_grid(text: str, defaults: dict[str, float]) -> GridSpec:
    """Parse --grid 'fx=975:10:1,baseline=0.539:0.01:0.001' into a GridSpec.

    Each entry is name=center:half_range:step; omitted axes collapse to a
    single point at their default center.
    """
    axes = {name: AxisSpec(center=defaults[name], half_range=0.0, step=1.0)
            for name in FREEZABLE}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        name, _, spec_txt = item.partition("=")
        name = name.strip()
        if name not in axes:
            raise _UsageError(
                f"--grid axis must be one of {FREEZABLE}, got {name!r}")
        parts = spec_txt.split(":")
        if len(parts) != 3:
            raise _UsageError(
                f"--grid {item!r}: expected name=center:half_range:step")
        try:
            center, half, step = (float(p) for p in parts)
        except ValueError as e:
            raise _UsageError(f"--grid {item!r}: {e}") from e
        axes[name] = AxisSpec(center=center, half_range=half, step=step)
    return GridSpec(fx=axes["fx"], cu=axes["cu"], cv=axes["cv"],
                    baseline=axes["baseline"])


def _read_board_file(path: str):
    try:
        return kittiio.read_boards(Path(path).read_text())
    except OSError as e:
        raise DataError(f"cannot read boards from {path}: {e}") from e


def _rect_calib_from_file(calib: kittiio.KittiCalibFile,
                          camera: str) -> RectifiedCalibration:
    try:
        k = calib.get(f"K_{camera}").reshape(3, 3)
        d = calib.get(f"D_{camera}")
        r_rect = calib.get(f"R_rect_{camera}").reshape(3, 3)
        p_rect = calib.get(f"P_rect_{camera}").reshape(3, 4)
    except KeyError as e:
        raise DataError(f"calibration file missing key for camera "
                        f"{camera}: {e}") from e
    intr = Intrinsics(fx=k[0, 0], fy=k[1, 1], cu=k[0, 2], cv=k[1, 2],
                      k1=d[0], k2=d[1], k3=d[2], k4=d[3], k5=d[4])
    return RectifiedCalibration(intrinsics=intr, r_rect=r_rect, p_rect=p_rect)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_detect(args) -> int:
    paths = [Path(p) for p in args.images]
    out = Path(args.out)
    if len(paths) > 1:
        out.mkdir(parents=True, exist_ok=True)
    overlay_dir = Path(args.overlay) if args.overlay else None
    if overlay_dir:
        overlay_dir.mkdir(parents=True, exist_ok=True)
    for path in paths:
        img = kittiio.load_image(str(path))
        boards, segments = detect_boards(img, abs_threshold=args.threshold,
                                         seed=args.seed, image_id=path.stem)
        if not boards:
            raise DataError(f"no boards detected in {path}")
        dump = kittiio.write_boards(boards)
        target = out / f"{path.stem}.txt" if len(paths) > 1 else out
        target.write_text(dump)
        log.info("%s: %d boards -> %s", path, len(boards), target)
        if overlay_dir:
            im = report.segment_overlay(img, segments)
            im.save(overlay_dir / f"{path.stem}_segments.png")
    return EXIT_OK


def _solution_from_args(args):
    left = _read_board_file(args.left)
    right = _read_board_file(args.right)
    fix = getattr(args, "fix", None)
    frozen = _parse_fix(fix) if fix else None
    sol = calibrate_boards(left, right, square_size=args.square_size,
                           image_size=_parse_image_size(args.image_size),
                           seed_focal=args.seed_focal, frozen=frozen)
    matches = match_boards(left, right, args.square_size)
    return sol, matches


def _cmd_calibrate(args) -> int:
    sol, matches = _solution_from_args(args)
    Path(args.out).write_text(report.write_solution(sol))
    if args.report:
        Path(args.report).write_text(report.reprojection_table(sol, matches))
    log.info("rms %.6f px over %d boards", sol.rms, len(matches))
    return EXIT_OK


def _cmd_sensitivity(args) -> int:
    sol, matches = _solution_from_args(args)
    curve = sensitivity_sweep(sol, matches, args.param,
                              args.range, args.step)
    Path(args.out).write_text(report.sensitivity_csv(curve))
    return EXIT_OK


def _cmd_refine(args) -> int:
    left = _read_board_file(args.left)
    right = _read_board_file(args.right)
    sol = calibrate_boards(left, right, square_size=args.square_size,
                           image_size=_parse_image_size(args.image_size),
                           seed_focal=args.seed_focal)
    matches = match_boards(left, right, args.square_size)
    state = sol.state
    grid = _parse_grid(args.grid, {
        "fx": state.left.fx, "cu": state.left.cu,
        "cv": state.left.cv, "baseline": state.baseline})
    grid.joint = args.joint

    def write_calib(solution, path: Path):
        path.write_text(report.write_solution(solution))

    runner = ExternalCommandRunner(command_template=args.runner,
                                   write_calib=write_calib)
    sequences = []
    seq_text = Path(args.sequences).read_text()
    for lineno, line in enumerate(seq_text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DataError(f"{args.sequences} line {lineno}: expected "
                            f"'<images> <ground-truth-poses>'")
        gt = kittiio.read_poses(Path(parts[1]).read_text())
        sequences.append((parts[0], gt))
    result = grid_search(grid, state, matches, runner, sequences,
                         workspace=args.workspace, jobs=args.jobs)
    Path(args.out).write_text(score_table_csv(result))
    if args.solution:
        Path(args.solution).write_text(report.write_solution(result.best))
    log.info("winner fx=%g cu=%g cv=%g baseline=%g", *result.best_point)
    return EXIT_OK


def _cmd_rectify(args) -> int:
    calib = kittiio.read_calib(Path(args.calib).read_text())
    rect = _rect_calib_from_file(calib, args.camera)
    in_dir = Path(args.indir)
    out_dir = Path(args.outdir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = sorted(p for p in in_dir.iterdir()
                   if p.suffix.lower() in (".png", ".pgm"))
    if not paths:
        raise DataError(f"no .png/.pgm images in {in_dir}")
    src_map = None
    for path in paths:
        img = kittiio.load_image(str(path))
        if src_map is None:
            src_map = rectification_map(rect, (img.shape[1], img.shape[0]))
        kittiio.save_image(str(out_dir / path.name), remap(img, src_map))
    return EXIT_OK


def _cmd_convert_features(args) -> int:
    default = _rect_calib_from_file(
        kittiio.read_calib(Path(args.default).read_text()), args.camera)
    custom = _rect_calib_from_file(
        kittiio.read_calib(Path(args.custom).read_text()), args.camera)
    rows = []
    text = Path(args.infile).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DataError(f"{args.infile} line {lineno}: expected 'u v'")
        rows.append([float(parts[0]), float(parts[1])])
    pts = np.array(rows).reshape(-1, 2)
    out = convert_feature(pts, default, custom)
    lines = [f"{u:.6f} {v:.6f}" for u, v in out]
    Path(args.outfile).write_text("\n".join(lines) + ("\n" if lines else ""))
    return EXIT_OK


def _cmd_eval(args) -> int:
    est = kittiio.read_poses(Path(args.est).read_text())
    gt = kittiio.read_poses(Path(args.gt).read_text())
    err = kitti_error(est, gt)
    print(f"t_rel: {err.t_rel:.6f} %")
    print(f"r_rel: {err.r_rel:.6f} deg/m")
    print(f"r_rel: {err.r_rel_per_100m:.6f} deg/100m")
    return EXIT_OK


def _cmd_synth(args) -> int:
    if args.layout == "kitti":
        scene = synth.kitti_like_layout(
            white_dilation_px=args.dilation,
            corner_noise_sigma=args.noise_sigma)
    else:
        scene = synth.diverse_layout()
        scene.white_dilation_px = args.dilation
        scene.corner_noise_sigma = args.noise_sigma
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    left, right, _ = synth.render(scene)
    kittiio.save_image(str(out / "left.png"), left)
    kittiio.save_image(str(out / "right.png"), right)
    rng = np.random.default_rng(args.seed) if args.noise_sigma > 0 else None
    for name in ("left", "right"):
        boards = synth.ground_truth_boards(scene, name, rng)
        (out / f"{name}_boards.txt").write_text(kittiio.write_boards(boards))
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser assembly


def _add_board_io(p: _Parser) -> None:
    p.add_argument("--left", required=True, help="left-camera board dump")
    p.add_argument("--right", required=True, help="right-camera board dump")
    p.add_argument("--square-size", type=float, required=True,
                   dest="square_size", help="checkerboard square size in m")
    p.add_argument("--seed-focal", type=float, default=975.0,
                   dest="seed_focal", help="initial focal length in px")
    p.add_argument("--image-size", default="1392x512", dest="image_size",
                   help="image size WxH for intrinsics initialization")


def build_parser() -> _Parser:
    parser = _Parser(prog="stereocal",
                     description="one-shot multi-board stereo calibration")
    parser.add_argument("--config", default=None,
                        help="key=value config file (flags take precedence)")
    parser.add_argument("--seed", type=int, default=0,
                        help="seed for all randomized steps")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect checkerboards in images")
    p.add_argument("images", nargs="+")
    p.add_argument("--out", required=True,
                   help="board dump file (one image) or directory")
    p.add_argument("--overlay", default=None,
                   help="directory for classified-edge overlays")
    p.add_argument("--threshold", type=float, default=None,
                   help="absolute gradient suppression threshold")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("calibrate", help="solve the stereo calibration")
    _add_board_io(p)
    p.add_argument("--fix", default=None,
                   help="freeze parameters, e.g. fx=980,baseline=0.539")
    p.add_argument("--out", required=True, help="solution file")
    p.add_argument("--report", default=None, help="per-board RMS table")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("sensitivity",
                       help="single-parameter sensitivity sweep")
    _add_board_io(p)
    p.add_argument("--param", required=True, choices=list(FREEZABLE))
    p.add_argument("--range", type=float, required=True,
                   help="sweep half-range around the optimum")
    p.add_argument("--step", type=float, required=True)
    p.add_argument("--out", required=True, help="CSV output")
    p.set_defaults(func=_cmd_sensitivity)

    p = sub.add_parser("refine",
                       help="odometry-scored grid search refinement")
    _add_board_io(p)
    p.add_argument("--grid", required=True,
                   help="axes as name=center:half_range:step, comma-separated")
    p.add_argument("--runner", required=True,
                   help="odometry command with {images} {calib} {out}")
    p.add_argument("--sequences", required=True,
                   help="file of '<images> <ground-truth-poses>' lines")
    p.add_argument("--out", required=True, help="score table CSV")
    p.add_argument("--solution", default=None, help="winning solution file")
    p.add_argument("--workspace", default=None)
    p.add_argument("--jobs", type=int, default=1,
                   help="concurrent grid-point evaluations")
    p.add_argument("--joint", action="store_true",
                   help="probe all four axes jointly instead of two stages")
    p.set_defaults(func=_cmd_refine)

    p = sub.add_parser("rectify", help="rectify raw images")
    p.add_argument("--calib", required=True, help="KITTI calibration file")
    p.add_argument("--camera", default="00", help="camera suffix (00/01)")
    p.add_argument("--in", required=True, dest="indir")
    p.add_argument("--out", required=True, dest="outdir")
    p.set_defaults(func=_cmd_rectify)

    p = sub.add_parser("convert-features",
                       help="re-express rectified features under a new "
                            "calibration")
    p.add_argument("--default", required=True,
                   help="calibration the features were produced under")
    p.add_argument("--custom", required=True, help="target calibration")
    p.add_argument("--camera", default="00")
    p.add_argument("--in", required=True, dest="infile")
    p.add_argument("--out", required=True, dest="outfile")
    p.set_defaults(func=_cmd_convert_features)

    p = sub.add_parser("eval", help="KITTI odometry error of a trajectory")
    p.add_argument("--est", required=True)
    p.add_argument("--gt", required=True)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="render a synthetic calibration scene")
    p.add_argument("--layout", choices=("kitti", "diverse"), default="kitti")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dilation", type=float, default=0.0,
                   help="white-square dilation in px")
    p.add_argument("--noise-sigma", type=float, default=0.0,
                   dest="noise_sigma", help="corner noise sigma in px")
    p.set_defaults(func=_cmd_synth)
    return parser


def _apply_config(parser: _Parser, argv: list[str]) -> None:
    """Load --config key=value pairs as parser defaults (flags win)."""
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.partition("=")[2]
    if path is None:
        return
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise DataError(f"cannot read config {path}: {e}") from e
    defaults = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DataError(f"{path} line {lineno}: expected key=value")
        defaults[key.strip().replace("-", "_")] = value.strip()
    subparsers = parser._subparsers._group_actions[0].choices.values()
    for p in [parser, *subparsers]:
        for action in p._actions:
            if action.dest in defaults:
                raw = defaults[action.dest]
                value = action.type(raw) if callable(action.type) else raw
                p.set_defaults(**{action.dest: value})
                action.required = False


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.INFO,
            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, InvalidInputError, RunnerError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

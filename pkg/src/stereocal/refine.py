"""Odometry-driven grid search over the weakly constrained parameters.

The reprojection objective barely constrains f_x, (c_u, c_v) and the
baseline in a single-shot layout, so these are probed on a grid: each
probe runs a constrained calibration, hands the candidate to an odometry
runner, and scores the resulting trajectory with the KITTI relative error
metric (rotation for the f_x/c_u/c_v stage, translation for the baseline
stage).
"""

from __future__ import annotations

import logging
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import numpy as np

from .calibrate import (
    BoardMatch,
    CalibrationSolution,
    CalibrationState,
    LMConfig,
    optimize,
    pin_frozen_values,
)
from .errors import InvalidInputError, NumericalError, RunnerError
from . import kittiio

log = logging.getLogger(__name__)

KITTI_LENGTHS = (100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0)


@dataclass
class AxisSpec:
    """One grid axis: center, symmetric half-range and step."""

    center: float
    half_range: float
    step: float

    def __post_init__(self):
        if self.step <= 0:
            raise InvalidInputError("grid step must be positive")
        if not np.isfinite(self.half_range) or self.half_range < 0:
            raise InvalidInputError("grid half-range must be finite and >= 0")

    def values(self) -> np.ndarray:
        n = int(np.floor(self.half_range / self.step + 1e-9))
        return self.center + np.arange(-n, n + 1) * self.step


@dataclass
class GridSpec:
    """Search grid: the f_x/c_u/c_v trio stage, then the baseline stage."""

    fx: AxisSpec
    cu: AxisSpec
    cv: AxisSpec
    baseline: AxisSpec
    joint: bool = False  # probe all four axes jointly instead of two stages


@dataclass
class OdometryError:
    """KITTI relative errors: translation in %, rotation in deg/m."""

    t_rel: float
    r_rel: float

    @property
    def r_rel_per_100m(self) -> float:
        return self.r_rel * 100.0


class OdometryRunner(Protocol):
    """Produces a trajectory from an image source and a candidate calibration."""

    def run(self, images: object, solution: CalibrationSolution,
            workspace: Path | None = None) -> np.ndarray: ...


@dataclass
class ScoreRow:
    fx: float
    cu: float
    cv: float
    baseline: float
    t_rel: float | None
    r_rel: float | None
    status: str


@dataclass
class GridSearchResult:
    best: CalibrationSolution
    best_point: tuple[float, float, float, float]
    table: list[ScoreRow] = field(default_factory=list)


def _trajectory_positions(traj: np.ndarray) -> np.ndarray:
    return traj[:, :, 3]


def _pose_inverse(pose: np.ndarray) -> np.ndarray:
    r = pose[:, :3]
    out = np.empty((3, 4))
    out[:, :3] = r.T
    out[:, 3] = -r.T @ pose[:, 3]
    return out


def _pose_compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty((3, 4))
    out[:, :3] = a[:, :3] @ b[:, :3]
    out[:, 3] = a[:, :3] @ b[:, 3] + a[:, 3]
    return out


def _rotation_angle(r: np.ndarray) -> float:
    c = (np.trace(r) - 1.0) / 2.0
    return float(np.arccos(np.clip(c, -1.0, 1.0)))


def kitti_error(estimated: np.ndarray, ground_truth: np.ndarray,
                lengths: tuple[float, ...] = KITTI_LENGTHS) -> OdometryError:
    """Standard KITTI relative pose error over 100..800 m subsequences.

    For each start frame and each path length, the relative transform of
    the subsequence is compared between estimate and ground truth; t_rel is
    the mean translation error over length in percent, r_rel the mean
    rotation angle over length in deg/m.
    """
    est = np.asarray(estimated, dtype=np.float64)
    gt = np.asarray(ground_truth, dtype=np.float64)
    if est.shape != gt.shape or est.ndim != 3 or len(est) < 2:
        raise InvalidInputError(
            f"trajectories must share shape (n>=2, 3, 4); got {est.shape} "
            f"and {gt.shape}")
    pos = _trajectory_positions(gt)
    dist = np.concatenate([[0.0], np.cumsum(
        np.linalg.norm(np.diff(pos, axis=0), axis=1))])

    t_errs = []
    r_errs = []
    n = len(gt)
    for first in range(n):
        for length in lengths:
            target = dist[first] + length
            if target > dist[-1]:
                break
            last = int(np.searchsorted(dist, target))
            gt_rel = _pose_compose(_pose_inverse(gt[first]), gt[last])
            est_rel = _pose_compose(_pose_inverse(est[first]), est[last])
            err = _pose_compose(_pose_inverse(est_rel), gt_rel)
            t_errs.append(np.linalg.norm(err[:, 3]) / length)
            r_errs.append(_rotation_angle(err[:, :3]) / length)
    if not t_errs:
        raise InvalidInputError(
            f"trajectory too short: covers {dist[-1]:.1f} m, "
            f"need >= {lengths[0]:.0f} m")
    return OdometryError(t_rel=float(np.mean(t_errs)) * 100.0,
                         r_rel=float(np.rad2deg(np.mean(r_errs))))


@dataclass
class ExternalCommandRunner:
    """Invokes an external odometry via a command template.

    The template carries ``{images}``, ``{calib}`` and ``{out}``
    placeholders; the command must write a KITTI-format trajectory to the
    ``{out}`` path. Deterministic behavior per (input, candidate) is the
    runner's responsibility.
    """

    command_template: str
    write_calib: Callable[[CalibrationSolution, Path], None]

    def run(self, images, solution: CalibrationSolution,
            workspace: Path | None = None) -> np.ndarray:
        workspace = Path(workspace or ".")
        workspace.mkdir(parents=True, exist_ok=True)
        calib_path = workspace / "calib.txt"
        out_path = workspace / "trajectory.txt"
        self.write_calib(solution, calib_path)
        cmd = self.command_template.format(images=images, calib=calib_path,
                                           out=out_path)
        proc = subprocess.run(shlex.split(cmd), capture_output=True, text=True)
        if proc.returncode != 0:
            raise RunnerError(
                f"odometry command failed ({proc.returncode}): {proc.stderr.strip()}")
        try:
            return kittiio.read_poses(out_path.read_text())
        except (OSError, Exception) as e:
            raise RunnerError(f"unparsable trajectory output: {e}") from e


def run_external_odometry(runner: OdometryRunner, images,
                          solution: CalibrationSolution,
                          workspace: Path | None = None) -> np.ndarray:
    """Adapter entry point: run the odometry for one calibration candidate."""
    return runner.run(images, solution, workspace)


def _score_candidate(solution: CalibrationSolution, runner: OdometryRunner,
                     sequences, workspace: Path | None) -> OdometryError:
    errs = []
    for i, (images, gt) in enumerate(sequences):
        ws = None if workspace is None else Path(workspace) / f"seq{i:02d}"
        traj = runner.run(images, solution, ws)
        errs.append(kitti_error(traj, gt))
    return OdometryError(t_rel=float(np.mean([e.t_rel for e in errs])),
                         r_rel=float(np.mean([e.r_rel for e in errs])))


def _argmin_toward_center(scores: list[float | None],
                          offsets: list[float]) -> int:
    """Index of the smallest score; ties broken toward the grid center."""
    best = None
    for i, s in enumerate(scores):
        if s is None:
            continue
        key = (s, offsets[i], i)
        if best is None or key < best[0]:
            best = (key, i)
    if best is None:
        raise RunnerError("all grid points failed")
    return best[1]


def grid_search(spec: GridSpec,
                state: CalibrationState,
                matches: list[BoardMatch],
                runner: OdometryRunner,
                sequences,
                workspace: Path | None = None,
                config: LMConfig | None = None,
                jobs: int = 1) -> GridSearchResult:
    """Two-stage grid refinement of (f_x, c_u, c_v) then the baseline.

    Stage 1 freezes the trio at each grid point, re-runs the calibration,
    scores the odometry's rotational error, and keeps the argmin. Stage 2
    probes the baseline around the winner, scoring translational error.
    Joint mode probes the full 4-D product, scoring rotational error.
    Failed grid points are recorded and skipped. ``jobs`` > 1 evaluates
    grid points concurrently with per-point isolated workspaces; the score
    table keeps grid-point order either way.
    """
    table: list[ScoreRow] = []

    def evaluate(fx, cu, cv, baseline, point_id):
        base = state.copy()
        base.frozen = frozenset({"fx", "cu", "cv", "baseline"})
        pinned = pin_frozen_values(
            base, {"fx": fx, "cu": cu, "cv": cv, "baseline": baseline})
        ws = None if workspace is None else Path(workspace) / f"p{point_id:04d}"
        try:
            sol = optimize(pinned, matches, config)
            err = _score_candidate(sol, runner, sequences, ws)
        except (NumericalError, InvalidInputError, RunnerError) as e:
            log.warning("grid point (%g, %g, %g, %g) failed: %s",
                        fx, cu, cv, baseline, e)
            return None, None, ScoreRow(fx, cu, cv, baseline, None, None,
                                        f"failed: {e}")
        return sol, err, ScoreRow(fx, cu, cv, baseline,
                                  err.t_rel, err.r_rel, "ok")

    def evaluate_points(points, offset):
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                outs = list(pool.map(
                    lambda pi: evaluate(*pi[1], offset + pi[0]),
                    enumerate(points)))
        else:
            outs = [evaluate(*p, offset + i) for i, p in enumerate(points)]
        table.extend(row for _, _, row in outs)
        return [(sol, err) for sol, err, _ in outs]

    fx_vals = spec.fx.values()
    cu_vals = spec.cu.values()
    cv_vals = spec.cv.values()
    b_vals = spec.baseline.values()

    if spec.joint:
        points = [(fx, cu, cv, b)
                  for fx in fx_vals for cu in cu_vals
                  for cv in cv_vals for b in b_vals]
        results = evaluate_points(points, 0)
        scores = [e.r_rel if e else None for _, e in results]
        offsets = [abs(p[0] - spec.fx.center) + abs(p[1] - spec.cu.center)
                   + abs(p[2] - spec.cv.center) + abs(p[3] - spec.baseline.center)
                   for p in points]
        i = _argmin_toward_center(scores, offsets)
        return GridSearchResult(best=results[i][0], best_point=points[i],
                                table=table)

    # stage 1: trio, scored on rotational error
    points1 = [(fx, cu, cv, spec.baseline.center)
               for fx in fx_vals for cu in cu_vals for cv in cv_vals]
    results1 = evaluate_points(points1, 0)
    scores1 = [e.r_rel if e else None for _, e in results1]
    offsets1 = [abs(p[0] - spec.fx.center) + abs(p[1] - spec.cu.center)
                + abs(p[2] - spec.cv.center) for p in points1]
    i1 = _argmin_toward_center(scores1, offsets1)
    fx_w, cu_w, cv_w, _ = points1[i1]

    # stage 2: baseline around the winner, scored on translational error
    points2 = [(fx_w, cu_w, cv_w, b) for b in b_vals
               if not np.isclose(b, spec.baseline.center)]
    results2 = evaluate_points(points2, len(points1))
    points2.append((fx_w, cu_w, cv_w, spec.baseline.center))
    results2.append((results1[i1][0], results1[i1][1]))
    scores2 = [e.t_rel if e else None for _, e in results2]
    offsets2 = [abs(b - spec.baseline.center) for (_, _, _, b) in points2]
    i2 = _argmin_toward_center(scores2, offsets2)
    best_sol = results2[i2][0]
    return GridSearchResult(best=best_sol, best_point=points2[i2], table=table)


def score_table_csv(result: GridSearchResult) -> str:
    """Score table as CSV: (f_x, c_u, c_v, baseline, t_rel, r_rel, status)."""
    lines = ["fx,cu,cv,baseline,t_rel,r_rel,status"]
    for row in result.table:
        t = "" if row.t_rel is None else f"{row.t_rel:.9g}"
        r = "" if row.r_rel is None else f"{row.r_rel:.9g}"
        lines.append(f"{row.fx:.9g},{row.cu:.9g},{row.cv:.9g},"
                     f"{row.baseline:.9g},{t},{r},{row.status}")
    return "\n".join(lines) + "\n"

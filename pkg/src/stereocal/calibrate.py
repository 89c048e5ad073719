"""Joint stereo calibration: board matching, homography initialization,
Levenberg-Marquardt optimization and single-parameter sensitivity sweeps.

The parameter vector covers 9 intrinsics per camera, the 6-DoF left-to-right
transform (translation split into a unit direction and its norm so the
baseline can be frozen), and a 6-DoF pose per board. Rotations update by
local axis-angle increments composed onto the current estimate. Jacobians
are analytic; a finite-difference fallback exists for debugging.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.transform import Rotation

from .boardfinder import Checkerboard
from .cameramodel import Intrinsics, Pose, StereoRig
from .errors import (
    BoardMismatchError,
    InvalidInputError,
    NumericalError,
    OptimizationError,
)

log = logging.getLogger(__name__)

FREEZABLE = ("fx", "cu", "cv", "baseline")


@dataclass
class BoardMatch:
    """Left/right detections of the same physical board."""

    left_board: Checkerboard
    right_board: Checkerboard
    rows: int
    cols: int
    square_size: float

    def object_points(self) -> np.ndarray:
        """Board-frame 3D corner grid (rows, cols, 3), planar model."""
        s = self.square_size
        xs = np.arange(self.cols) * s
        ys = np.arange(self.rows) * s
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx, gy, np.zeros_like(gx)], axis=-1)


@dataclass
class CalibrationState:
    """Current parameter estimate; the left camera is the reference."""

    left: Intrinsics
    right: Intrinsics
    right_pose: Pose                 # left-camera frame -> right-camera frame
    board_poses: list[Pose]          # board frame -> left-camera frame
    frozen: frozenset[str] = frozenset()

    @property
    def baseline(self) -> float:
        return float(np.linalg.norm(self.right_pose.translation))

    @property
    def pitch(self) -> float:
        r = self.right_pose.rotation
        return float(np.arctan2(r[0, 2], r[2, 2]))

    def rig(self) -> StereoRig:
        return StereoRig(left=self.left, right=self.right,
                         right_pose=self.right_pose)

    def copy(self) -> "CalibrationState":
        return CalibrationState(
            left=replace(self.left), right=replace(self.right),
            right_pose=Pose(self.right_pose.rotation.copy(),
                            self.right_pose.translation.copy()),
            board_poses=[Pose(p.rotation.copy(), p.translation.copy())
                         for p in self.board_poses],
            frozen=self.frozen)


@dataclass
class CalibrationSolution:
    """Optimization result with residual bookkeeping.

    ``residuals`` holds one (rows*cols, 2) array per match per camera, in
    (match, left/right) order. Overall RMS is over residual components:
    rms^2 * n_components = sum of squared components.
    """

    state: CalibrationState
    residuals: list[tuple[np.ndarray, np.ndarray]]
    board_rms: np.ndarray
    rms: float
    excluded: np.ndarray
    iterations: int
    converged: bool

    def rms_excluding(self, excluded: np.ndarray | None = None) -> float:
        """Overall RMS over non-excluded boards, recomputed without refit."""
        flags = self.excluded if excluded is None else np.asarray(excluded)
        chunks = [np.concatenate([l.ravel(), r.ravel()])
                  for (l, r), skip in zip(self.residuals, flags) if not skip]
        if not chunks:
            raise InvalidInputError("all boards excluded")
        allr = np.concatenate(chunks)
        return float(np.sqrt(np.mean(allr ** 2)))


@dataclass
class SensitivityCurve:
    """RMS (and auxiliary series) versus probe values of one parameter."""

    parameter: str
    probes: np.ndarray
    rms: np.ndarray
    pitch_deg: np.ndarray | None = None


@dataclass
class LMConfig:
    max_iterations: int = 200
    cost_tolerance: float = 1e-12
    gradient_tolerance: float = 1e-10
    initial_damping: float = 1e-3
    max_damping: float = 1e14


def match_boards(left: list[Checkerboard],
                 right: list[Checkerboard],
                 square_size: float) -> list[BoardMatch]:
    """Associate boards across views by centroid proximity.

    Minimum-total-distance assignment between board centroids; stereo
    disparity shifts nearby boards more than distant ones, so a pure
    left-to-right ordering can swap boards at different depths. Pairs of
    unequal grid size are disallowed.
    """
    if len(left) != len(right):
        raise BoardMismatchError(
            f"board counts differ: {len(left)} left vs {len(right)} right")

    def sort_key(b: Checkerboard):
        return float(b.corners[..., 0].mean())

    left_sorted = sorted(left, key=sort_key)
    cents_l = np.array([b.corners.reshape(-1, 2).mean(axis=0)
                        for b in left_sorted])
    cents_r = np.array([b.corners.reshape(-1, 2).mean(axis=0) for b in right])
    cost = np.linalg.norm(cents_l[:, None] - cents_r[None, :], axis=-1)
    size_ok = np.array([[rb.rows == lb.rows and rb.cols == lb.cols
                         for rb in right] for lb in left_sorted])
    cost[~size_ok] = 1e12
    rows_idx, cols_idx = linear_sum_assignment(cost)
    matches = []
    for li, ri in zip(rows_idx, cols_idx):
        lb, rb = left_sorted[li], right[ri]
        if not size_ok[li, ri]:
            raise BoardMismatchError(
                f"no free right board of size {lb.rows}x{lb.cols}")
        matches.append(BoardMatch(left_board=lb, right_board=rb,
                                  rows=lb.rows, cols=lb.cols,
                                  square_size=square_size))
    return matches


def init_intrinsics(image_size: tuple[int, int], seed_focal: float) -> Intrinsics:
    """Seed intrinsics: given focal, image-center principal point, zero k."""
    if seed_focal <= 0:
        raise InvalidInputError("seed focal must be positive")
    w, h = image_size
    if w <= 0 or h <= 0:
        raise InvalidInputError("image size must be positive")
    return Intrinsics(fx=seed_focal, fy=seed_focal, cu=w / 2.0, cv=h / 2.0)


def dlt_homography(obj_xy: np.ndarray, img_uv: np.ndarray) -> np.ndarray:
    """Normalized DLT homography mapping plane points to image points."""
    obj_xy = np.asarray(obj_xy, dtype=np.float64)
    img_uv = np.asarray(img_uv, dtype=np.float64)
    n = len(obj_xy)
    if n < 4:
        raise NumericalError("homography needs at least 4 points")

    def norm_transform(pts):
        c = pts.mean(axis=0)
        scale = np.sqrt(2.0) / max(np.mean(np.linalg.norm(pts - c, axis=1)), 1e-12)
        t = np.array([[scale, 0, -scale * c[0]],
                      [0, scale, -scale * c[1]],
                      [0, 0, 1.0]])
        return t

    ta = norm_transform(obj_xy)
    tb = norm_transform(img_uv)
    a = (np.column_stack([obj_xy, np.ones(n)]) @ ta.T)[:, :2]
    b = (np.column_stack([img_uv, np.ones(n)]) @ tb.T)[:, :2]
    m = np.zeros((2 * n, 9))
    m[0::2, 0:2] = a
    m[0::2, 2] = 1.0
    m[0::2, 6:8] = -a * b[:, 0:1]
    m[0::2, 8] = -b[:, 0]
    m[1::2, 3:5] = a
    m[1::2, 5] = 1.0
    m[1::2, 6:8] = -a * b[:, 1:2]
    m[1::2, 8] = -b[:, 1]
    _, _, vt = np.linalg.svd(m)
    hn = vt[-1].reshape(3, 3)
    h = np.linalg.inv(tb) @ hn @ ta
    return h / h[2, 2]


def decompose_homography(h: np.ndarray, intr: Intrinsics) -> Pose:
    """Plane-to-image homography -> board pose, given intrinsics."""
    a = np.linalg.inv(intr.matrix) @ h
    lam = 1.0 / np.linalg.norm(a[:, 0])
    if a[2, 2] * lam < 0:  # board must sit in front of the camera
        lam = -lam
    r1 = lam * a[:, 0]
    r2 = lam * a[:, 1]
    r3 = np.cross(r1, r2)
    r = np.stack([r1, r2, r3], axis=1)
    t = lam * a[:, 2]
    if t[2] <= 0:
        raise NumericalError("homography places board behind camera")
    return Pose(r, t).orthonormalized()


def init_extrinsics_from_homographies(matches: list[BoardMatch],
                                      left: Intrinsics,
                                      right: Intrinsics,
                                      frozen: frozenset[str] = frozenset()
                                      ) -> CalibrationState:
    """Initialize board poses and the relative pose from per-board DLT.

    The left-to-right transform is averaged over boards (rotation mean over
    quaternions, translation mean); boards with degenerate homographies are
    skipped for the average but keep their left-pose initialization.
    """
    if not matches:
        raise InvalidInputError("need at least one board match")
    board_poses = []
    rels = []
    for m in matches:
        obj = m.object_points().reshape(-1, 3)[:, :2]
        hl = dlt_homography(obj, m.left_board.corners.reshape(-1, 2))
        pose_l = decompose_homography(hl, left)
        board_poses.append(pose_l)
        try:
            hr = dlt_homography(obj, m.right_board.corners.reshape(-1, 2))
            pose_r = decompose_homography(hr, right)
        except NumericalError:
            continue
        # left->right = (board->right) after (board->left)^-1
        rels.append(pose_r.compose(pose_l.inverse()))
    if not rels:
        raise OptimizationError("no board yielded a usable relative pose")
    rot = Rotation.from_matrix(np.array([p.rotation for p in rels])).mean()
    t = np.mean([p.translation for p in rels], axis=0)
    return CalibrationState(left=left, right=right,
                            right_pose=Pose(rot.as_matrix(), t),
                            board_poses=board_poses, frozen=frozen)


# ---------------------------------------------------------------------------
# residuals and analytic Jacobians


def _project_with_jacobians(points: np.ndarray, intr: Intrinsics,
                            want_jac: bool = True):
    """Project camera-frame points; optionally return d(uv)/d(point) and
    d(uv)/d(intrinsics) with intrinsics ordered (fx,fy,cu,cv,k1..k5)."""
    p = np.asarray(points, dtype=np.float64)
    z = p[:, 2]
    if np.any(z <= 0):
        raise OptimizationError("point behind camera during optimization")
    x = p[:, 0] / z
    y = p[:, 1] / z
    r2 = x * x + y * y
    radial = 1.0 + intr.k1 * r2 + intr.k2 * r2 ** 2 + intr.k5 * r2 ** 3
    xd = x * radial + 2.0 * intr.k3 * x * y + intr.k4 * (r2 + 2.0 * x * x)
    yd = y * radial + intr.k3 * (r2 + 2.0 * y * y) + 2.0 * intr.k4 * x * y
    uv = np.stack([intr.fx * xd + intr.cu, intr.fy * yd + intr.cv], axis=1)
    if not want_jac:
        return uv, None, None

    n = len(p)
    drad = intr.k1 + 2.0 * intr.k2 * r2 + 3.0 * intr.k5 * r2 ** 2
    dxd_dx = radial + 2.0 * x * x * drad + 2.0 * intr.k3 * y + 6.0 * intr.k4 * x
    dxd_dy = 2.0 * x * y * drad + 2.0 * intr.k3 * x + 2.0 * intr.k4 * y
    dyd_dx = 2.0 * x * y * drad + 2.0 * intr.k3 * x + 2.0 * intr.k4 * y
    dyd_dy = radial + 2.0 * y * y * drad + 6.0 * intr.k3 * y + 2.0 * intr.k4 * x

    # d(x, y)/d(point)
    inv_z = 1.0 / z
    jn = np.zeros((n, 2, 3))
    jn[:, 0, 0] = inv_z
    jn[:, 0, 2] = -x * inv_z
    jn[:, 1, 1] = inv_z
    jn[:, 1, 2] = -y * inv_z

    jd = np.empty((n, 2, 2))
    jd[:, 0, 0] = dxd_dx
    jd[:, 0, 1] = dxd_dy
    jd[:, 1, 0] = dyd_dx
    jd[:, 1, 1] = dyd_dy

    f = np.array([intr.fx, intr.fy])
    j_point = f[None, :, None] * np.einsum("nij,njk->nik", jd, jn)

    j_intr = np.zeros((n, 2, 9))
    j_intr[:, 0, 0] = xd
    j_intr[:, 1, 1] = yd
    j_intr[:, 0, 2] = 1.0
    j_intr[:, 1, 3] = 1.0
    j_intr[:, 0, 4] = intr.fx * x * r2
    j_intr[:, 1, 4] = intr.fy * y * r2
    j_intr[:, 0, 5] = intr.fx * x * r2 ** 2
    j_intr[:, 1, 5] = intr.fy * y * r2 ** 2
    j_intr[:, 0, 6] = intr.fx * 2.0 * x * y
    j_intr[:, 1, 6] = intr.fy * (r2 + 2.0 * y * y)
    j_intr[:, 0, 7] = intr.fx * (r2 + 2.0 * x * x)
    j_intr[:, 1, 7] = intr.fy * 2.0 * x * y
    j_intr[:, 0, 8] = intr.fx * x * r2 ** 3
    j_intr[:, 1, 8] = intr.fy * y * r2 ** 3
    return uv, j_point, j_intr


def _cross_matrices(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrices for an (n, 3) array."""
    m = np.zeros(v.shape[:-1] + (3, 3))
    m[..., 0, 1] = -v[..., 2]
    m[..., 0, 2] = v[..., 1]
    m[..., 1, 0] = v[..., 2]
    m[..., 1, 2] = -v[..., 0]
    m[..., 2, 0] = -v[..., 1]
    m[..., 2, 1] = v[..., 0]
    return m


def _param_count(n_boards: int) -> int:
    return 24 + 6 * n_boards


def _tangent_basis(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two unit vectors orthogonal to u (deterministic)."""
    ref = np.array([0.0, 0.0, 1.0]) if abs(u[2]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(u, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(u, e1)
    return e1, e2


def _frozen_indices(frozen: frozenset[str]) -> list[int]:
    idx = {"fx": 0, "cu": 2, "cv": 3, "baseline": 23}
    bad = set(frozen) - set(idx)
    if bad:
        raise InvalidInputError(f"unknown frozen parameters: {sorted(bad)}")
    return sorted(idx[name] for name in frozen)


def residuals_and_jacobian(state: CalibrationState,
                           matches: list[BoardMatch],
                           want_jac: bool = True):
    """Stacked residual vector and dense Jacobian over all corners.

    Residual order: per match, left-camera corners then right-camera
    corners, each corner contributing (du, dv).
    """
    n_boards = len(matches)
    n_params = _param_count(n_boards)
    rows_total = sum(2 * 2 * m.rows * m.cols for m in matches)
    r_vec = np.empty(rows_total)
    jac = np.zeros((rows_total, n_params)) if want_jac else None

    r_rel = state.right_pose.rotation
    t_rel = state.right_pose.translation
    b = np.linalg.norm(t_rel)
    u = t_rel / b if b > 0 else np.array([1.0, 0.0, 0.0])
    e1, e2 = _tangent_basis(u)

    row = 0
    for bi, m in enumerate(matches):
        obj = m.object_points().reshape(-1, 3)
        n = len(obj)
        pose = state.board_poses[bi]
        p_l = obj @ pose.rotation.T + pose.translation
        obs_l = m.left_board.corners.reshape(-1, 2)
        uv_l, jp_l, ji_l = _project_with_jacobians(p_l, state.left, want_jac)
        r_vec[row:row + 2 * n] = (uv_l - obs_l).ravel()
        if want_jac:
            jpl = jp_l.reshape(2 * n, 3)
            cross_l = _cross_matrices(p_l - pose.translation)  # [R_i X]x
            col = 24 + 6 * bi
            jac[row:row + 2 * n, :9] = ji_l.reshape(2 * n, 9)
            jac[row:row + 2 * n, col:col + 3] = -np.einsum(
                "nij,njk->nik", jp_l, cross_l).reshape(2 * n, 3)
            jac[row:row + 2 * n, col + 3:col + 6] = jpl.reshape(n, 2, 3) \
                .reshape(2 * n, 3)
        row += 2 * n

        p_r = p_l @ r_rel.T + t_rel
        obs_r = m.right_board.corners.reshape(-1, 2)
        uv_r, jp_r, ji_r = _project_with_jacobians(p_r, state.right, want_jac)
        r_vec[row:row + 2 * n] = (uv_r - obs_r).ravel()
        if want_jac:
            jac[row:row + 2 * n, 9:18] = ji_r.reshape(2 * n, 9)
            # relative rotation increment: p_r = exp(w) R p_l + t
            cross_r = _cross_matrices(p_r - t_rel)  # [R_rel p_l]x
            jac[row:row + 2 * n, 18:21] = -np.einsum(
                "nij,njk->nik", jp_r, cross_r).reshape(2 * n, 3)
            # translation: t = b * normalize(u + m1 e1 + m2 e2)
            jac[row:row + 2 * n, 21] = (jp_r @ (b * e1)).ravel()
            jac[row:row + 2 * n, 22] = (jp_r @ (b * e2)).ravel()
            jac[row:row + 2 * n, 23] = (jp_r @ u).ravel()
            # board pose, chained through the relative transform
            jp_chain = np.einsum("nij,jk->nik", jp_r, r_rel)
            cross_l = _cross_matrices(p_l - pose.translation)
            col = 24 + 6 * bi
            jac[row:row + 2 * n, col:col + 3] += -np.einsum(
                "nij,njk->nik", jp_chain, cross_l).reshape(2 * n, 3)
            jac[row:row + 2 * n, col + 3:col + 6] += jp_chain.reshape(2 * n, 3)
        row += 2 * n
    return r_vec, jac


def finite_difference_jacobian(state: CalibrationState,
                               matches: list[BoardMatch],
                               step: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian in the same parameterization (debug aid)."""
    n_params = _param_count(len(matches))
    base, _ = residuals_and_jacobian(state, matches, want_jac=False)
    jac = np.zeros((len(base), n_params))
    for i in range(n_params):
        delta = np.zeros(n_params)
        delta[i] = step
        plus = apply_step(state, delta)
        minus = apply_step(state, -delta)
        rp, _ = residuals_and_jacobian(plus, matches, want_jac=False)
        rm, _ = residuals_and_jacobian(minus, matches, want_jac=False)
        jac[:, i] = (rp - rm) / (2.0 * step)
    return jac


def apply_step(state: CalibrationState, delta: np.ndarray) -> CalibrationState:
    """Apply a parameter increment, composing local rotation updates."""
    new = state.copy()
    la = new.left.as_array() + delta[:9]
    ra = new.right.as_array() + delta[9:18]
    new.left = Intrinsics.from_array(la)
    new.right = Intrinsics.from_array(ra)

    r_rel = Rotation.from_rotvec(delta[18:21]).as_matrix() @ new.right_pose.rotation
    t = new.right_pose.translation
    b = np.linalg.norm(t)
    u = t / b if b > 0 else np.array([1.0, 0.0, 0.0])
    e1, e2 = _tangent_basis(u)
    u_new = u + delta[21] * e1 + delta[22] * e2
    u_new /= np.linalg.norm(u_new)
    b_new = b + delta[23]
    new.right_pose = Pose(r_rel, b_new * u_new).orthonormalized()

    for i, pose in enumerate(new.board_poses):
        d = delta[24 + 6 * i:24 + 6 * i + 6]
        r = Rotation.from_rotvec(d[:3]).as_matrix() @ pose.rotation
        new.board_poses[i] = Pose(r, pose.translation + d[3:]).orthonormalized()
    return new


def _solution_from_state(state: CalibrationState, matches: list[BoardMatch],
                         iterations: int, converged: bool) -> CalibrationSolution:
    r_vec, _ = residuals_and_jacobian(state, matches, want_jac=False)
    residuals = []
    board_rms = []
    row = 0
    for m in matches:
        n = m.rows * m.cols
        rl = r_vec[row:row + 2 * n].reshape(n, 2)
        row += 2 * n
        rr = r_vec[row:row + 2 * n].reshape(n, 2)
        row += 2 * n
        residuals.append((rl, rr))
        board_rms.append(np.sqrt(np.mean(np.concatenate([rl, rr]) ** 2)))
    rms = float(np.sqrt(np.mean(r_vec ** 2)))
    excluded = np.array([getattr(m.left_board, "excluded", False)
                         for m in matches])
    return CalibrationSolution(state=state, residuals=residuals,
                               board_rms=np.array(board_rms), rms=rms,
                               excluded=excluded, iterations=iterations,
                               converged=converged)


def optimize(state: CalibrationState, matches: list[BoardMatch],
             config: LMConfig | None = None) -> CalibrationSolution:
    """Minimize the summed squared reprojection error by Levenberg-Marquardt.

    Damping starts at 1e-3, multiplies by 10 on a rejected step and divides
    by 10 on an accepted one; accepted steps never increase the cost.
    Frozen parameters keep their exact input values.
    """
    config = config or LMConfig()
    total_corners = sum(2 * m.rows * m.cols for m in matches)
    if total_corners < 12:
        raise InvalidInputError("need at least 6 corners per camera")
    frozen_idx = _frozen_indices(state.frozen)
    n_params = _param_count(len(matches))
    active = np.setdiff1d(np.arange(n_params), frozen_idx)

    current = state.copy()
    r_vec, jac = residuals_and_jacobian(current, matches)
    cost = float(r_vec @ r_vec)
    lam = config.initial_damping
    iterations = 0
    converged = False

    for iterations in range(1, config.max_iterations + 1):
        ja = jac[:, active]
        g = ja.T @ r_vec
        if np.max(np.abs(g)) < config.gradient_tolerance:
            converged = True
            break
        jtj = ja.T @ ja
        diag = np.diag(jtj).copy()
        diag[diag < 1e-12] = 1e-12
        accepted = False
        while lam <= config.max_damping:
            try:
                step_active = np.linalg.solve(jtj + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            delta = np.zeros(n_params)
            delta[active] = step_active
            try:
                candidate = apply_step(current, delta)
                r_new, jac_new = residuals_and_jacobian(candidate, matches)
            except (NumericalError, InvalidInputError):
                lam *= 10.0
                continue
            new_cost = float(r_new @ r_new)
            if new_cost < cost:
                rel_drop = (cost - new_cost) / max(cost, 1e-300)
                current, r_vec, jac = candidate, r_new, jac_new
                cost = new_cost
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                if rel_drop < config.cost_tolerance:
                    converged = True
                break
            lam *= 10.0
        if not accepted:
            if lam > config.max_damping:
                converged = True  # damping exhausted at a (local) minimum
            break
        if converged:
            break

    sol = _solution_from_state(current, matches, iterations, converged)
    return sol


def calibrate_boards(left: list[Checkerboard], right: list[Checkerboard],
                     square_size: float, image_size: tuple[int, int],
                     seed_focal: float,
                     frozen: dict[str, float] | None = None,
                     config: LMConfig | None = None) -> CalibrationSolution:
    """End-to-end: match, initialize, optimize.

    ``frozen`` maps parameter names to pinned values (None value keeps the
    initialization's value).
    """
    matches = match_boards(left, right, square_size)
    intr = init_intrinsics(image_size, seed_focal)
    frozen = frozen or {}
    state = init_extrinsics_from_homographies(
        matches, replace(intr), replace(intr),
        frozen=frozenset(frozen.keys()))
    state = pin_frozen_values(state, frozen)
    return optimize(state, matches, config)


def pin_frozen_values(state: CalibrationState,
                      frozen: dict[str, float | None]) -> CalibrationState:
    """Set explicit values for frozen parameters on a state copy."""
    new = state.copy()
    for name, value in frozen.items():
        if value is None:
            continue
        if name == "fx":
            new.left = replace(new.left, fx=float(value))
        elif name == "cu":
            new.left = replace(new.left, cu=float(value))
        elif name == "cv":
            new.left = replace(new.left, cv=float(value))
        elif name == "baseline":
            t = new.right_pose.translation
            b = np.linalg.norm(t)
            if b <= 0:
                raise InvalidInputError("cannot scale a zero baseline")
            new.right_pose = Pose(new.right_pose.rotation, t * float(value) / b)
        else:
            raise InvalidInputError(f"unknown frozen parameter {name}")
    new.frozen = new.frozen | frozenset(frozen.keys())
    return new


def sensitivity_sweep(solution: CalibrationSolution,
                      matches: list[BoardMatch],
                      parameter: str,
                      half_range: float,
                      step: float,
                      config: LMConfig | None = None) -> SensitivityCurve:
    """Freeze one parameter at probe values around the current optimum and
    re-run the optimization, recording the constrained RMS per probe.

    Baseline sweeps additionally record the right-camera pitch angle.
    """
    if parameter not in FREEZABLE:
        raise InvalidInputError(f"parameter must be one of {FREEZABLE}")
    if step <= 0 or half_range < 0:
        raise InvalidInputError("step must be positive, range non-negative")
    center = _parameter_value(solution.state, parameter)
    n = int(np.floor(half_range / step + 1e-9))
    probes = center + np.arange(-n, n + 1) * step
    rms = np.full(len(probes), np.nan)
    pitch = np.full(len(probes), np.nan)
    for i, probe in enumerate(probes):
        base = solution.state.copy()
        base.frozen = solution.state.frozen | {parameter}
        pinned = pin_frozen_values(base, {parameter: probe})
        try:
            sol = optimize(pinned, matches, config)
        except (NumericalError, InvalidInputError) as e:
            log.warning("probe %s=%g failed: %s", parameter, probe, e)
            continue
        rms[i] = sol.rms
        pitch[i] = np.rad2deg(sol.state.pitch)
    return SensitivityCurve(
        parameter=parameter, probes=probes, rms=rms,
        pitch_deg=pitch if parameter == "baseline" else None)


def _parameter_value(state: CalibrationState, parameter: str) -> float:
    if parameter == "fx":
        return state.left.fx
    if parameter == "cu":
        return state.left.cu
    if parameter == "cv":
        return state.left.cv
    if parameter == "baseline":
        return state.baseline
    raise InvalidInputError(f"unknown parameter {parameter}")

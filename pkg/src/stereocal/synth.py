"""Synthetic checkerboard scene rendering with exact ground-truth corners.

Scenes are rendered with 4x4 supersampling through the full distortion
model; ground-truth corner positions come from exact projection, never
from the raster. Exposure asymmetry (white squares dilated by a subpixel
amount) and a cylindrical board bend are available to reproduce the
failure modes of gradient-based corner refinement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boardfinder import Checkerboard
from .cameramodel import Intrinsics, Pose, StereoRig, project, undistort
from .errors import InvalidInputError

BACKGROUND = 0.5
BLACK = 0.08
WHITE = 0.92
SUPERSAMPLE = 4


@dataclass
class BoardSpec:
    """One checkerboard: inner-corner grid, square size and pose.

    The board frame has inner corner (r, c) at (c*s, r*s, 0); the physical
    board spans one extra square on every side. ``pose`` maps board
    coordinates into the left-camera frame. ``bend_sagitta`` bows the board
    cylindrically along its x extent (max z displacement at mid-width).
    """

    rows: int
    cols: int
    square_size: float
    pose: Pose
    bend_sagitta: float = 0.0
    flagged_bent: bool = False

    def corner_points(self) -> np.ndarray:
        """Inner-corner 3D points in the board frame, (rows, cols, 3)."""
        s = self.square_size
        xs = np.arange(self.cols) * s
        ys = np.arange(self.rows) * s
        gx, gy = np.meshgrid(xs, ys)
        pts = np.stack([gx, gy, np.zeros_like(gx)], axis=-1)
        pts[..., 2] = self._bend_z(pts[..., 0])
        return pts

    def _bend_z(self, x: np.ndarray) -> np.ndarray:
        if self.bend_sagitta == 0.0:
            return np.zeros_like(x)
        s = self.square_size
        width = (self.cols + 1) * s
        u = (x + s) / width  # 0 at left physical edge, 1 at right
        return self.bend_sagitta * (1.0 - (2.0 * u - 1.0) ** 2)

    def outline_points(self) -> np.ndarray:
        """Physical board outline corners (incl. margin) in the board frame."""
        s = self.square_size
        x0, x1 = -1.5 * s, (self.cols + 0.5) * s
        y0, y1 = -1.5 * s, (self.rows + 0.5) * s
        pts = np.array([[x0, y0, 0.0], [x1, y0, 0.0],
                        [x1, y1, 0.0], [x0, y1, 0.0]])
        pts[:, 2] = self._bend_z(pts[:, 0])
        return pts


@dataclass
class SceneSpec:
    """Boards plus rig, image size and imaging imperfections."""

    boards: list[BoardSpec]
    rig: StereoRig
    image_size: tuple[int, int]  # (width, height)
    white_dilation_px: float = 0.0
    corner_noise_sigma: float = 0.0
    allow_clip: bool = False


def _camera_pose(spec: SceneSpec, camera: str) -> Pose:
    """Transform from left-camera coordinates to the given camera's frame."""
    if camera == "left":
        return Pose.identity()
    return spec.rig.right_pose


def _intrinsics(spec: SceneSpec, camera: str) -> Intrinsics:
    return spec.rig.left if camera == "left" else spec.rig.right


def ground_truth_corners(spec: SceneSpec, camera: str) -> list[np.ndarray]:
    """Exact projected inner-corner grids, one (rows, cols, 2) per board."""
    cam = _camera_pose(spec, camera)
    intr = _intrinsics(spec, camera)
    out = []
    for board in spec.boards:
        pts = cam.compose(board.pose).apply(board.corner_points())
        out.append(project(pts, intr))
    return out


def ground_truth_boards(spec: SceneSpec, camera: str,
                        rng: np.random.Generator | None = None
                        ) -> list[Checkerboard]:
    """Ground-truth corners as Checkerboard objects, with optional noise."""
    boards = []
    for b, corners in zip(spec.boards, ground_truth_corners(spec, camera)):
        if spec.corner_noise_sigma > 0:
            if rng is None:
                raise InvalidInputError("corner noise requires an rng")
            corners = corners + rng.normal(0.0, spec.corner_noise_sigma,
                                           corners.shape)
        boards.append(Checkerboard(rows=b.rows, cols=b.cols, corners=corners,
                                   image_id=camera, excluded=False))
    return boards


def _checker_color(xb: np.ndarray, yb: np.ndarray, board: BoardSpec,
                   dilation_m: float) -> np.ndarray:
    """Board-plane color sample; NaN outside the physical board."""
    s = board.square_size
    x = xb + s  # checker-pattern origin at its top-left outer corner
    y = yb + s
    w = (board.cols + 1) * s
    h = (board.rows + 1) * s
    # half a square-width of white margin around the pattern
    inside = (x >= -0.5 * s) & (x < w + 0.5 * s) & (y >= -0.5 * s) & (y < h + 0.5 * s)
    in_pattern = (x >= 0) & (x < w) & (y >= 0) & (y < h)
    i = np.floor(x / s).astype(int)
    j = np.floor(y / s).astype(int)
    white = (i + j) % 2 == 0
    if dilation_m > 0:
        # white regions grow: black cells shrink by the dilation on all sides
        fx = x - i * s
        fy = y - j * s
        core = ((fx > dilation_m) & (fx < s - dilation_m)
                & (fy > dilation_m) & (fy < s - dilation_m))
        black = ~white & core
    else:
        black = ~white
    color = np.where(black & in_pattern, BLACK, WHITE)
    return np.where(inside, color, np.nan)


def render_camera(spec: SceneSpec, camera: str,
                  supersample: int = SUPERSAMPLE) -> np.ndarray:
    """Render one camera's view of the scene."""
    w, h = spec.image_size
    intr = _intrinsics(spec, camera)
    cam = _camera_pose(spec, camera)
    img = np.full((h, w), BACKGROUND)
    ss = supersample
    offsets = (np.arange(ss) + 0.5) / ss - 0.5

    # paint far to near so nearer boards occlude correctly on overlap
    def depth(b: BoardSpec) -> float:
        return float(cam.compose(b.pose).apply(b.corner_points().reshape(-1, 3))
                     [:, 2].mean())

    for board in sorted(spec.boards, key=depth, reverse=True):
        pose = cam.compose(board.pose)  # board frame -> this camera
        outline_cam = pose.apply(board.outline_points())
        if np.any(outline_cam[:, 2] <= 0):
            if spec.allow_clip:
                continue
            raise InvalidInputError("board behind camera")
        outline_px = project(outline_cam, intr)
        corners_px = project(pose.apply(board.corner_points()), intr)
        if not spec.allow_clip:
            all_px = np.concatenate([outline_px,
                                     corners_px.reshape(-1, 2)])
            if (all_px[:, 0].min() < 0 or all_px[:, 0].max() > w - 1
                    or all_px[:, 1].min() < 0 or all_px[:, 1].max() > h - 1):
                raise InvalidInputError("board outside image frustum")
        u0 = max(int(np.floor(outline_px[:, 0].min())) - 3, 0)
        u1 = min(int(np.ceil(outline_px[:, 0].max())) + 3, w - 1)
        v0 = max(int(np.floor(outline_px[:, 1].min())) - 3, 0)
        v1 = min(int(np.ceil(outline_px[:, 1].max())) + 3, h - 1)
        if u1 < u0 or v1 < v0:
            continue

        us = np.arange(u0, u1 + 1, dtype=np.float64)
        vs = np.arange(v0, v1 + 1, dtype=np.float64)
        uu, vv = np.meshgrid(us, vs)
        du, dv = np.meshgrid(offsets, offsets, indexing="ij")
        su = (uu[..., None, None] + du).reshape(-1)
        sv = (vv[..., None, None] + dv).reshape(-1)
        samples = np.stack([su, sv], axis=-1)
        norm = undistort(samples, intr)
        rays = np.concatenate([norm, np.ones((len(norm), 1))], axis=1)

        inv = pose.inverse()
        d_b = rays @ inv.rotation.T
        t_b = inv.translation
        dz = d_b[:, 2]
        good = np.abs(dz) > 1e-12
        lam = np.where(good, -t_b[2] / np.where(good, dz, 1.0), np.nan)
        if board.bend_sagitta != 0.0:
            for _ in range(4):
                xb = lam * d_b[:, 0] + t_b[0]
                lam = np.where(good,
                               (board._bend_z(xb) - t_b[2])
                               / np.where(good, dz, 1.0), np.nan)
        xb = lam * d_b[:, 0] + t_b[0]
        yb = lam * d_b[:, 1] + t_b[1]

        z_mid = pose.apply(np.array([[board.cols * board.square_size / 2,
                                      board.rows * board.square_size / 2,
                                      0.0]]))[0, 2]
        dilation_m = spec.white_dilation_px * z_mid / (0.5 * (intr.fx + intr.fy))
        color = _checker_color(xb, yb, board, dilation_m)
        color[lam <= 0] = np.nan

        nh, nw = len(vs), len(us)
        color = color.reshape(nh, nw, ss, ss)
        hit = ~np.isnan(color)
        hits = hit.sum(axis=(2, 3))
        summed = np.where(hit, color, 0.0).sum(axis=(2, 3))
        base = img[v0:v1 + 1, u0:u1 + 1]
        blended = (summed + (ss * ss - hits) * base) / (ss * ss)
        img[v0:v1 + 1, u0:u1 + 1] = blended
    return img


def render(spec: SceneSpec, supersample: int = SUPERSAMPLE
           ) -> tuple[np.ndarray, np.ndarray, dict[str, list[np.ndarray]]]:
    """Render the stereo pair and return exact corner ground truth."""
    left = render_camera(spec, "left", supersample)
    right = render_camera(spec, "right", supersample)
    gt = {"left": ground_truth_corners(spec, "left"),
          "right": ground_truth_corners(spec, "right")}
    return left, right, gt


def default_rig(fx: float = 975.0, cu: float = 700.0, cv: float = 247.0,
                baseline: float = 0.539,
                image_size: tuple[int, int] = (1392, 512)) -> StereoRig:
    """Stereo rig seeded with the toolkit's default search configuration."""
    left = Intrinsics(fx=fx, fy=fx, cu=cu, cv=cv)
    right = Intrinsics(fx=fx, fy=fx, cu=cu, cv=cv)
    pose = Pose(np.eye(3), np.array([-baseline, 0.0, 0.0]))
    return StereoRig(left=left, right=right, right_pose=pose)


def _tilted_pose(x: float, y: float, z: float, roll: float,
                 extra_yaw: float = 0.0, extra_pitch: float = 0.0,
                 board_w: float = 0.0, board_h: float = 0.0) -> Pose:
    """Board pose centered at (x, y, z), tilted toward the camera axis."""
    from scipy.spatial.transform import Rotation

    yaw = -np.arctan2(x, z) * 0.5 + extra_yaw
    pitch = np.arctan2(y, z) * 0.5 + extra_pitch
    r = Rotation.from_euler("yxz", [yaw, pitch, roll]).as_matrix()
    center_board = np.array([board_w / 2.0, board_h / 2.0, 0.0])
    t = np.array([x, y, z]) - r @ center_board
    return Pose(r, t)


def kitti_like_layout(square_size: float = 0.1,
                      bend_sagitta: float = 0.0,
                      white_dilation_px: float = 0.0,
                      corner_noise_sigma: float = 0.0,
                      rig: StereoRig | None = None) -> SceneSpec:
    """Single-shot wall of 12 moderately distant, center-tilted boards.

    All boards sit beyond 3 m; the last board carries the bent flag (its
    sagitta defaults to 0 so the planar model is exact unless requested).
    """
    if rig is None:
        rig = default_rig()
    boards = []
    grid = [(-2.3, -0.74), (-1.15, -0.78), (0.0, -0.76), (1.15, -0.80),
            (2.35, -0.72), (-2.25, 0.70), (-1.2, 0.74), (0.05, 0.76),
            (1.25, 0.72), (2.4, 0.74), (-0.6, 0.0), (0.7, -0.02)]
    rolls = [0.115, -0.138, 0.092, -0.1035, 0.1265, -0.115, 0.1035, -0.092,
             0.138, -0.1265, 0.0805, -0.1495]
    # uniform alternating tilt relative to each board's viewing direction,
    # so outer boards are no more foreshortened than central ones
    yaw_signs = [1, -1, 1, -1, 1, -1, 1, -1, 1, -1, 1, -1]
    pitch_signs = [1, 1, -1, -1, 1, -1, 1, -1, 1, -1, 1, -1]
    rel_yaw = 0.095
    rel_pitch = 0.055
    sizes = [(4, 6), (5, 6), (4, 6), (5, 6), (4, 6), (5, 6),
             (4, 6), (5, 6), (4, 6), (5, 6), (4, 6), (4, 6)]
    for i, ((x, y), roll, (rows, cols)) in enumerate(zip(grid, rolls, sizes)):
        z = 5.0 + 0.02 * (((i * 7) % 5) - 2) + 0.01 * (((i * 3) % 7) - 3) / 3.0
        w = (cols - 1) * square_size
        h = (rows - 1) * square_size
        extra_yaw = yaw_signs[i] * rel_yaw - 0.5 * np.arctan2(x, z)
        extra_pitch = pitch_signs[i] * rel_pitch + 0.5 * np.arctan2(y, z)
        sagitta = bend_sagitta if i == 11 else 0.0
        boards.append(BoardSpec(rows=rows, cols=cols, square_size=square_size,
                                pose=_tilted_pose(x, y, z, roll,
                                                  extra_yaw, extra_pitch,
                                                  board_w=w, board_h=h),
                                bend_sagitta=sagitta,
                                flagged_bent=(i == 11)))
    return SceneSpec(boards=boards, rig=rig,
                     image_size=(1392, 512),
                     white_dilation_px=white_dilation_px,
                     corner_noise_sigma=corner_noise_sigma)


def diverse_layout(square_size: float = 0.1,
                   rig: StereoRig | None = None) -> SceneSpec:
    """Many diverse poses: near and far boards, strong rotations.

    Contrast case for the sensitivity analysis; includes a board closer
    than 1.5 m and covers the image widely.
    """
    if rig is None:
        rig = default_rig()
    boards = []
    poses = [
        # (x, y, z, roll, extra_yaw, extra_pitch)
        (0.0, 0.065, 0.78, 0.05, 0.715, 0.0),
        (0.3575, -0.065, 1.04, -0.1, -0.585, 0.26),
        (-0.39, 0.0325, 1.17, 0.12, 0.65, -0.325),
        (0.065, 0.1625, 1.43, -0.08, 0.0, 0.585),
        (-0.715, -0.1625, 1.69, 0.1, -0.65, -0.26),
        (0.78, 0.13, 1.82, -0.12, 0.52, 0.39),
        (-1.8, 0.3, 3.4, 0.09, 0.39, 0.0),
        (2.0, -0.35, 3.8, -0.07, -0.455, -0.39),
        (0.3, -0.5, 4.2, 0.11, 0.26, 0.52),
        (-2.4, -0.5, 4.8, -0.09, -0.325, 0.325),
        (2.6, 0.5, 5.2, 0.08, 0.585, -0.26),
        (-0.9, 0.6, 5.6, -0.11, -0.52, 0.455),
        (1.5, -0.65, 6.0, 0.1, 0.65, 0.26),
        (-2.9, 0.1, 6.2, -0.08, -0.39, -0.455),
    ]
    for x, y, z, roll, yaw, pitch in poses:
        rows, cols = 5, 6
        w = (cols - 1) * square_size
        h = (rows - 1) * square_size
        boards.append(BoardSpec(rows=rows, cols=cols, square_size=square_size,
                                pose=_tilted_pose(x, y, z, roll, yaw, pitch,
                                                  board_w=w, board_h=h)))
    return SceneSpec(boards=boards, rig=rig, image_size=(1392, 512),
                     allow_clip=True)

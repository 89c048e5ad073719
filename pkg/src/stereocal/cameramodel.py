"""Pinhole camera with radial-tangential distortion and stereo rectification.

Distortion coefficient order follows the KITTI calibration file convention:
(k1, k2) radial r^2/r^4, (k3, k4) tangential, k5 radial r^6.

Conventions: points are (x, y) normalized or (u, v) pixel coordinates;
camera frames are right-handed, z along the optical axis, y down. A Pose
maps its own frame into the parent frame: p_parent = R @ p_own + t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.spatial.transform import Rotation

from .errors import ConvergenceError, InvalidInputError

UNDISTORT_TOL = 1e-10
UNDISTORT_MAX_ITER = 50


@dataclass
class Intrinsics:
    """9 intrinsic parameters: focal lengths, principal point, distortion."""

    fx: float
    fy: float
    cu: float
    cv: float
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    k4: float = 0.0
    k5: float = 0.0

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInputError("focal lengths must be positive")

    @property
    def k(self) -> np.ndarray:
        return np.array([self.k1, self.k2, self.k3, self.k4, self.k5])

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cu],
                         [0.0, self.fy, self.cv],
                         [0.0, 0.0, 1.0]])

    def as_array(self) -> np.ndarray:
        return np.array([self.fx, self.fy, self.cu, self.cv,
                         self.k1, self.k2, self.k3, self.k4, self.k5])

    @classmethod
    def from_array(cls, a) -> "Intrinsics":
        return cls(*[float(v) for v in a])


@dataclass
class Pose:
    """Rigid transform: p_parent = rotation @ p + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation

    def inverse(self) -> "Pose":
        return Pose(self.rotation.T, -self.rotation.T @ self.translation)

    def compose(self, other: "Pose") -> "Pose":
        """self after other: (self * other).apply(p) = self.apply(other.apply(p))."""
        return Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation)

    def orthonormalized(self) -> "Pose":
        u, _, vt = np.linalg.svd(self.rotation)
        r = u @ vt
        if np.linalg.det(r) < 0:
            u[:, -1] = -u[:, -1]
            r = u @ vt
        return Pose(r, self.translation.copy())


@dataclass
class StereoRig:
    """Stereo pair: left camera is the reference frame.

    ``right_pose`` maps left-camera coordinates into the right-camera frame
    (p_right = R @ p_left + t), matching the KITTI calibration file
    convention; the right camera center in the left frame is -R.T @ t.
    """

    left: Intrinsics
    right: Intrinsics
    right_pose: Pose

    @property
    def baseline(self) -> float:
        return float(np.linalg.norm(self.right_pose.translation))

    @property
    def right_center(self) -> np.ndarray:
        p = self.right_pose
        return -p.rotation.T @ p.translation

    @property
    def pitch(self) -> float:
        """Relative rotation angle about the camera y axis, radians."""
        r = self.right_pose.rotation
        return float(np.arctan2(r[0, 2], r[2, 2]))


def distort(normalized: np.ndarray, intr: Intrinsics) -> np.ndarray:
    """Apply radial-tangential distortion to ideal normalized coordinates."""
    pts = np.asarray(normalized, dtype=np.float64)
    x = pts[..., 0]
    y = pts[..., 1]
    r2 = x * x + y * y
    radial = 1.0 + intr.k1 * r2 + intr.k2 * r2 ** 2 + intr.k5 * r2 ** 3
    xd = x * radial + 2.0 * intr.k3 * x * y + intr.k4 * (r2 + 2.0 * x * x)
    yd = y * radial + intr.k3 * (r2 + 2.0 * y * y) + 2.0 * intr.k4 * x * y
    return np.stack([xd, yd], axis=-1)


def undistort(pixel: np.ndarray, intr: Intrinsics) -> np.ndarray:
    """Invert distortion by fixed-point iteration; pixel -> ideal normalized.

    Iterates x <- (x_d - tangential(x)) / radial(x) from the distorted
    point until the step drops below UNDISTORT_TOL.
    """
    pix = np.asarray(pixel, dtype=np.float64)
    xd = (pix[..., 0] - intr.cu) / intr.fx
    yd = (pix[..., 1] - intr.cv) / intr.fy
    x, y = xd.copy(), yd.copy()
    for _ in range(UNDISTORT_MAX_ITER):
        r2 = x * x + y * y
        radial = 1.0 + intr.k1 * r2 + intr.k2 * r2 ** 2 + intr.k5 * r2 ** 3
        tx = 2.0 * intr.k3 * x * y + intr.k4 * (r2 + 2.0 * x * x)
        ty = intr.k3 * (r2 + 2.0 * y * y) + 2.0 * intr.k4 * x * y
        x_new = (xd - tx) / radial
        y_new = (yd - ty) / radial
        step = np.max(np.hypot(x_new - x, y_new - y)) if x.size else 0.0
        x, y = x_new, y_new
        if step < UNDISTORT_TOL:
            break
    else:
        raise ConvergenceError(
            f"undistortion did not converge (last step {step:.3e})")
    return np.stack([x, y], axis=-1)


def project(points: np.ndarray, intr: Intrinsics) -> np.ndarray:
    """Project camera-frame 3D points to pixels via the full model."""
    pts = np.asarray(points, dtype=np.float64)
    z = pts[..., 2]
    if np.any(z <= 0):
        raise InvalidInputError("point behind camera (z <= 0)")
    norm = pts[..., :2] / z[..., None]
    d = distort(norm, intr)
    uv = np.empty_like(d)
    uv[..., 0] = intr.fx * d[..., 0] + intr.cu
    uv[..., 1] = intr.fy * d[..., 1] + intr.cv
    return uv


@dataclass
class RectifiedCalibration:
    """Raw intrinsics plus the rectifying rotation and projection matrix."""

    intrinsics: Intrinsics
    r_rect: np.ndarray   # (3, 3) raw camera frame -> rectified frame
    p_rect: np.ndarray   # (3, 4)


def stereo_rectify(rig: StereoRig) -> tuple[RectifiedCalibration, RectifiedCalibration]:
    """Rectify a stereo rig: split the relative rotation symmetrically and
    align the common x axis with the baseline.

    Both rectified projections share focal length and principal point; the
    right one carries the -f*baseline fourth-column term.
    """
    b = rig.baseline
    if b <= 0:
        raise InvalidInputError("degenerate rig: zero baseline")
    center = rig.right_center
    rot = Rotation.from_matrix(rig.right_pose.rotation)
    half = Rotation.from_rotvec(rot.as_rotvec() / 2.0).as_matrix()
    bb = half @ center
    e1 = bb / np.linalg.norm(bb)
    e2 = np.cross([0.0, 0.0, 1.0], e1)
    e2 = e2 / np.linalg.norm(e2)
    e3 = np.cross(e1, e2)
    align = np.stack([e1, e2, e3])
    r_left = align @ half
    r_right = r_left @ rig.right_pose.rotation.T

    f = 0.5 * (rig.left.fx + rig.left.fy)
    # keep the left principal ray fixed so an identity rig yields an identity map
    ray = r_left @ np.array([0.0, 0.0, 1.0])
    cu = rig.left.cu - f * ray[0] / ray[2]
    cv = rig.left.cv - f * ray[1] / ray[2]
    p_left = np.array([[f, 0.0, cu, 0.0],
                       [0.0, f, cv, 0.0],
                       [0.0, 0.0, 1.0, 0.0]])
    p_right = p_left.copy()
    p_right[0, 3] = -f * b
    return (RectifiedCalibration(rig.left, r_left, p_left),
            RectifiedCalibration(rig.right, r_right, p_right))


def rectification_map(calib: RectifiedCalibration,
                      image_size: tuple[int, int]) -> np.ndarray:
    """Per-destination-pixel source coordinates for inverse-map remapping.

    ``image_size`` is (width, height); returns an array (h, w, 2) of source
    (x, y) coordinates in the raw image.
    """
    w, h = image_size
    f = calib.p_rect[0, 0]
    cu = calib.p_rect[0, 2]
    cv = calib.p_rect[1, 2]
    us, vs = np.meshgrid(np.arange(w, dtype=np.float64),
                         np.arange(h, dtype=np.float64))
    rays = np.stack([(us - cu) / f, (vs - cv) / f, np.ones_like(us)], axis=-1)
    raw = rays @ calib.r_rect  # == (r_rect.T @ ray) per pixel
    norm = raw[..., :2] / raw[..., 2:3]
    d = distort(norm, calib.intrinsics)
    src = np.empty_like(d)
    src[..., 0] = calib.intrinsics.fx * d[..., 0] + calib.intrinsics.cu
    src[..., 1] = calib.intrinsics.fy * d[..., 1] + calib.intrinsics.cv
    return src


def remap(img: np.ndarray, src_map: np.ndarray) -> np.ndarray:
    """Bilinear remap; destinations sampling outside the source become 0."""
    coords = np.stack([src_map[..., 1], src_map[..., 0]])
    return map_coordinates(img, coords, order=1, mode="constant", cval=0.0)


def rectified_to_raw(pixels: np.ndarray, calib: RectifiedCalibration) -> np.ndarray:
    """Map rectified pixel coordinates back to raw-image coordinates."""
    pix = np.asarray(pixels, dtype=np.float64)
    f = calib.p_rect[0, 0]
    cu = calib.p_rect[0, 2]
    cv = calib.p_rect[1, 2]
    rays = np.stack([(pix[..., 0] - cu) / f,
                     (pix[..., 1] - cv) / f,
                     np.ones(pix.shape[:-1])], axis=-1)
    raw = rays @ calib.r_rect
    norm = raw[..., :2] / raw[..., 2:3]
    d = distort(norm, calib.intrinsics)
    out = np.empty_like(d)
    out[..., 0] = calib.intrinsics.fx * d[..., 0] + calib.intrinsics.cu
    out[..., 1] = calib.intrinsics.fy * d[..., 1] + calib.intrinsics.cv
    return out


def raw_to_rectified(pixels: np.ndarray, calib: RectifiedCalibration) -> np.ndarray:
    """Map raw-image pixel coordinates into the rectified image."""
    norm = undistort(pixels, calib.intrinsics)
    rays = np.concatenate([norm, np.ones(norm.shape[:-1] + (1,))], axis=-1)
    rect = rays @ calib.r_rect.T
    f = calib.p_rect[0, 0]
    cu = calib.p_rect[0, 2]
    cv = calib.p_rect[1, 2]
    out = np.empty(norm.shape)
    out[..., 0] = f * rect[..., 0] / rect[..., 2] + cu
    out[..., 1] = f * rect[..., 1] / rect[..., 2] + cv
    return out


def convert_feature(pixels: np.ndarray,
                    default: RectifiedCalibration,
                    custom: RectifiedCalibration) -> np.ndarray:
    """Re-express rectified feature coordinates under another calibration.

    Features are distorted back to the raw image with the default
    parameters, then undistorted and re-rectified with the custom ones.
    """
    raw = rectified_to_raw(pixels, default)
    return raw_to_rectified(raw, custom)

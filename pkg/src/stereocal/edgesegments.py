"""Edge classification, segment grouping and robust line fitting.

Edge candidates are classified into four polarity/orientation classes,
adjacent same-class candidates are grouped into square-side segments, and
lines are fitted to segment point pools with RANSAC followed by a total
least squares refit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateFitError, InvalidInputError
from .imagegrad import EdgeCandidates

MIN_SEGMENT_POINTS = 5
DEFAULT_DIST_THRESHOLD = 0.3
DEFAULT_ANGLE_TOLERANCE = np.deg2rad(10.0)
RANSAC_ITERATIONS = 100


class EdgeClass(enum.Enum):
    """Square-side class: edge orientation x black/white polarity."""

    VERTICAL_POSITIVE = "V+"
    VERTICAL_NEGATIVE = "V-"
    HORIZONTAL_POSITIVE = "H+"
    HORIZONTAL_NEGATIVE = "H-"

    @property
    def is_vertical(self) -> bool:
        return self in (EdgeClass.VERTICAL_POSITIVE, EdgeClass.VERTICAL_NEGATIVE)

    @property
    def is_horizontal(self) -> bool:
        return not self.is_vertical


@dataclass
class EdgeSegment:
    """Ordered subpixel edge points of one checkerboard square side."""

    edge_class: EdgeClass
    points: np.ndarray      # (n, 2) subpixel (x, y)
    directions: np.ndarray  # (n,) gradient direction per point

    @property
    def mean_direction(self) -> float:
        # circular mean; directions within one class span < 90 degrees
        return float(np.arctan2(np.mean(np.sin(self.directions)),
                                np.mean(np.cos(self.directions))))

    @property
    def length(self) -> float:
        """Arc length of the point chain."""
        if len(self.points) < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(self.points, axis=0), axis=1)))

    @property
    def endpoints(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points[0], self.points[-1]


@dataclass
class Line:
    """Line in Hessian normal form: normal . x = offset, |normal| = 1."""

    normal: np.ndarray
    offset: float

    def distance(self, points: np.ndarray) -> np.ndarray:
        return np.abs(points @ self.normal - self.offset)


def classify(direction: np.ndarray) -> np.ndarray:
    """Classify gradient directions into the four edge classes.

    Vertical classes when the gradient is within 45 degrees of the x axis
    (45-degree ties go to vertical); polarity by gradient sign along the
    dominant axis. Vectorized; returns an object array of EdgeClass.
    """
    direction = np.asarray(direction)
    c = np.cos(direction)
    s = np.sin(direction)
    vertical = np.abs(c) >= np.abs(s)
    positive = np.where(vertical, c > 0, s > 0)
    out = np.empty(direction.shape, dtype=object)
    out[vertical & positive] = EdgeClass.VERTICAL_POSITIVE
    out[vertical & ~positive] = EdgeClass.VERTICAL_NEGATIVE
    out[~vertical & positive] = EdgeClass.HORIZONTAL_POSITIVE
    out[~vertical & ~positive] = EdgeClass.HORIZONTAL_NEGATIVE
    return out


def classify_one(direction: float) -> EdgeClass:
    return classify(np.array([direction]))[0]


def group_segments(candidates: EdgeCandidates,
                   min_points: int = MIN_SEGMENT_POINTS) -> list[EdgeSegment]:
    """Group 8-adjacent same-class candidates into ordered segments.

    Adjacency is evaluated at integer-pixel resolution; components with
    fewer than ``min_points`` candidates are discarded. Points are ordered
    along the segment's dominant axis.
    """
    if len(candidates) == 0:
        return []
    classes = classify(candidates.direction)
    xs = candidates.pixel[:, 0]
    ys = candidates.pixel[:, 1]
    x0, y0 = xs.min(), ys.min()
    shape = (ys.max() - y0 + 1, xs.max() - x0 + 1)
    structure = np.ones((3, 3), dtype=int)
    segments: list[EdgeSegment] = []
    for cls in EdgeClass:
        sel = np.nonzero(classes == cls)[0]
        if len(sel) == 0:
            continue
        mask = np.zeros(shape, dtype=bool)
        mask[ys[sel] - y0, xs[sel] - x0] = True
        labels, nlab = ndimage.label(mask, structure=structure)
        lab_of = labels[ys[sel] - y0, xs[sel] - x0]
        for lab in range(1, nlab + 1):
            idx = sel[lab_of == lab]
            if len(idx) < min_points:
                continue
            pts = candidates.position[idx]
            dirs = candidates.direction[idx]
            span = pts.max(axis=0) - pts.min(axis=0)
            axis = 0 if span[0] >= span[1] else 1
            order = np.argsort(pts[:, axis], kind="stable")
            segments.append(EdgeSegment(cls, pts[order], dirs[order]))
    return segments


def _tls_line(points: np.ndarray) -> Line:
    """Total least squares line through a point set (>= 2 points)."""
    centroid = points.mean(axis=0)
    d = points - centroid
    cov = d.T @ d
    w, v = np.linalg.eigh(cov)
    normal = v[:, 0]  # eigenvector of the smaller eigenvalue
    # deterministic sign: largest-magnitude component positive
    i = np.argmax(np.abs(normal))
    if normal[i] < 0:
        normal = -normal
    return Line(normal=normal, offset=float(normal @ centroid))


def fit_line_ransac(points: np.ndarray,
                    directions: np.ndarray,
                    dist_threshold: float = DEFAULT_DIST_THRESHOLD,
                    angle_tolerance: float = DEFAULT_ANGLE_TOLERANCE,
                    rng: np.random.Generator | int | None = 0,
                    iterations: int = RANSAC_ITERATIONS
                    ) -> tuple[Line, np.ndarray]:
    """RANSAC line fit with a gradient-perpendicularity inlier test.

    A point is an inlier when its distance to the line is below
    ``dist_threshold`` and its gradient direction is perpendicular to the
    line within ``angle_tolerance``. The consensus winner is refit by total
    least squares on its inliers. Deterministic given the seed.
    """
    points = np.asarray(points, dtype=np.float64)
    directions = np.asarray(directions, dtype=np.float64)
    if dist_threshold <= 0 or angle_tolerance <= 0:
        raise InvalidInputError("thresholds must be positive")
    n = len(points)
    if n < 2:
        raise DegenerateFitError(f"need at least 2 points, got {n}")
    rng = np.random.default_rng(rng)

    grad = np.stack([np.cos(directions), np.sin(directions)], axis=1)
    cos_tol = np.cos(angle_tolerance)

    # all candidate pairs drawn up front; lines evaluated in a batch
    i = rng.integers(0, n, size=iterations)
    j = rng.integers(0, n - 1, size=iterations)
    j = np.where(j >= i, j + 1, j)
    p, q = points[i], points[j]
    tang = q - p
    norms = np.linalg.norm(tang, axis=1)
    valid = norms > 1e-12
    normals = np.stack([-tang[:, 1], tang[:, 0]], axis=1)
    normals[valid] /= norms[valid, None]
    offsets = np.einsum("ij,ij->i", normals, p)

    dist = np.abs(points @ normals.T - offsets)          # (n, iters)
    align = np.abs(grad @ normals.T)                     # (n, iters)
    inliers = (dist < dist_threshold) & (align > cos_tol) & valid
    counts = inliers.sum(axis=0)
    best = int(np.argmax(counts))
    if counts[best] < max(2, 0.5 * n):
        raise DegenerateFitError(
            f"best consensus {counts[best]}/{n} below 50%")
    mask = inliers[:, best]
    line = _tls_line(points[mask])
    # final mask against the refit line
    dist_final = line.distance(points)
    align_final = np.abs(grad @ line.normal)
    mask = (dist_final < dist_threshold) & (align_final > cos_tol)
    if mask.sum() >= 2:
        line = _tls_line(points[mask])
    return line, mask

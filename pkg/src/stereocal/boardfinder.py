"""Checkerboard recovery from edge segments and subpixel corner refinement.

Corners appear where segments of different classes end close together; a
connection graph over these candidates is traversed in a snake pattern to
recover full boards. Each corner is then refined as the intersection of
two RANSAC-fitted lines, with the classical gradient-based refiner kept as
a comparator.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .edgesegments import (
    DEFAULT_ANGLE_TOLERANCE,
    DEFAULT_DIST_THRESHOLD,
    EdgeSegment,
    Line,
    fit_line_ransac,
)
from .errors import DegenerateIntersectionError, NumericalError
from .imagegrad import GradientField

log = logging.getLogger(__name__)

DEFAULT_PROXIMITY = 3.0
DEFAULT_LENGTH_RATIO = 2.0
GRADIENT_WINDOW = 9

_DIRECTIONS = ("right", "down", "left", "up")
_OPPOSITE = {"right": "left", "left": "right", "up": "down", "down": "up"}


@dataclass
class CornerCandidate:
    """Cluster of segment endpoints forming a putative corner."""

    position: np.ndarray                 # (2,) centroid of endpoints
    incident: list[tuple[int, int]]      # (segment index, endpoint 0/1)


@dataclass
class ConnectionGraph:
    """Corner candidates plus direction-labeled adjacency between them."""

    candidates: list[CornerCandidate]
    segments: list[EdgeSegment]
    # adjacency[i][direction] = (neighbor index, connecting segment index)
    adjacency: list[dict[str, tuple[int, int]]] = field(default_factory=list)

    def neighbor(self, i: int, direction: str) -> int | None:
        entry = self.adjacency[i].get(direction)
        return entry[0] if entry else None


@dataclass
class Checkerboard:
    """Complete rows x cols grid of subpixel corners for one board."""

    rows: int
    cols: int
    corners: np.ndarray          # (rows, cols, 2) row-major grid
    image_id: str = ""
    excluded: bool = False

    def snake_order(self) -> np.ndarray:
        """Corners flattened in snake order (alternating row direction)."""
        out = []
        for r in range(self.rows):
            row = self.corners[r]
            out.append(row if r % 2 == 0 else row[::-1])
        return np.concatenate(out, axis=0)

    @classmethod
    def from_snake(cls, rows: int, cols: int, flat: np.ndarray,
                   image_id: str = "") -> "Checkerboard":
        grid = np.empty((rows, cols, 2))
        for r in range(rows):
            seg = flat[r * cols:(r + 1) * cols]
            grid[r] = seg if r % 2 == 0 else seg[::-1]
        return cls(rows=rows, cols=cols, corners=grid, image_id=image_id)


def find_corner_candidates(segments: list[EdgeSegment],
                           proximity: float = DEFAULT_PROXIMITY
                           ) -> list[CornerCandidate]:
    """Cluster segment endpoints and keep clusters where >= 3 classes meet.

    Interior corners collect four classes; three are tolerated at board
    borders. At least one horizontal and one vertical class are required.
    """
    if not segments:
        return []
    pts = []
    owner = []
    for si, seg in enumerate(segments):
        a, b = seg.endpoints
        pts.append(a)
        owner.append((si, 0))
        pts.append(b)
        owner.append((si, 1))
    pts = np.asarray(pts)
    tree = cKDTree(pts)
    parent = list(range(len(pts)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in tree.query_pairs(proximity):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri

    clusters: dict[int, list[int]] = {}
    for i in range(len(pts)):
        clusters.setdefault(find(i), []).append(i)

    # a corner can fracture into two nearby part-clusters when its chain
    # ends spread slightly beyond the pairwise radius; merge clusters that
    # are missing classes into a close neighbor (complete corners are left
    # alone, so adjacent small-square corners never fuse)
    def n_classes(members: list[int]) -> int:
        return len({segments[owner[m][0]].edge_class for m in members})

    for _ in range(2):
        keys = list(clusters.keys())
        cents = np.array([pts[clusters[k]].mean(axis=0) for k in keys])
        ctree = cKDTree(cents)
        merged = False
        for ki, k in enumerate(keys):
            if k not in clusters or n_classes(clusters[k]) >= 3:
                continue
            dists, idx = ctree.query(cents[ki], k=2)
            if dists[1] <= 1.5 * proximity and keys[idx[1]] in clusters:
                clusters[keys[idx[1]]].extend(clusters.pop(k))
                merged = True
        if not merged:
            break

    candidates = []
    for members in clusters.values():
        classes = {segments[owner[m][0]].edge_class for m in members}
        if len(classes) < 3:
            continue
        if not any(c.is_horizontal for c in classes):
            continue
        if not any(c.is_vertical for c in classes):
            continue
        pos = pts[members].mean(axis=0)
        candidates.append(CornerCandidate(position=pos,
                                          incident=[owner[m] for m in members]))

    # rescue pass: a chain can stop a couple of pixels short of the corner
    # (suppression eats the points where both edges mix), leaving its
    # endpoint just out of clustering range; attach it to the nearest
    # centroid with a more generous radius
    assigned = {key for c in candidates for key in c.incident}
    if candidates:
        centroids = np.array([c.position for c in candidates])
        ctree = cKDTree(centroids)
        for m in range(len(pts)):
            if owner[m] in assigned:
                continue
            dist, ci = ctree.query(pts[m])
            if dist <= 1.5 * proximity:
                candidates[ci].incident.append(owner[m])

    # deterministic order
    candidates.sort(key=lambda c: (c.position[1], c.position[0]))
    return candidates


def _direction_label(v: np.ndarray) -> str:
    if abs(v[0]) >= abs(v[1]):
        return "right" if v[0] > 0 else "left"
    return "down" if v[1] > 0 else "up"


def build_connection_graph(candidates: list[CornerCandidate],
                           segments: list[EdgeSegment],
                           length_ratio: float = DEFAULT_LENGTH_RATIO
                           ) -> ConnectionGraph:
    """Connect candidate pairs joined by a segment of compatible length.

    The connecting segment's length is compared against the median length
    of the other same-orientation incident segments at each endpoint
    (vertical against vertical, horizontal against horizontal, so that
    perspective foreshortening of one axis does not break the test); an
    edge is rejected if either ratio exceeds ``length_ratio``. Edges are
    labeled by dominant direction; competing edges for one slot keep the
    nearest neighbor.
    """
    graph = ConnectionGraph(candidates=candidates, segments=segments,
                            adjacency=[{} for _ in candidates])
    # endpoint -> candidate index
    end_to_cand: dict[tuple[int, int], int] = {}
    for ci, cand in enumerate(candidates):
        for key in cand.incident:
            end_to_cand[key] = ci

    for si, seg in enumerate(segments):
        a = end_to_cand.get((si, 0))
        b = end_to_cand.get((si, 1))
        if a is None or b is None or a == b:
            continue
        ok = True
        vertical = seg.edge_class.is_vertical
        for ci in (a, b):
            others = [segments[sj].length
                      for sj, _ in candidates[ci].incident
                      if sj != si
                      and segments[sj].edge_class.is_vertical == vertical
                      and segments[sj].length > 0]
            if others and seg.length > 0:
                ratio = max(seg.length, np.median(others)) / \
                    min(seg.length, np.median(others))
                if ratio > length_ratio:
                    ok = False
                    break
        if not ok:
            continue
        v = candidates[b].position - candidates[a].position
        label = _direction_label(v)
        dist = float(np.linalg.norm(v))
        for src, dst, lab in ((a, b, label), (b, a, _OPPOSITE[label])):
            cur = graph.adjacency[src].get(lab)
            if cur is None or dist < np.linalg.norm(
                    candidates[cur[0]].position - candidates[src].position):
                graph.adjacency[src][lab] = (dst, si)
    return graph


def _trace_board(graph: ConnectionGraph, start: int) -> list[int] | None:
    """Snake traversal from a start corner; None if rows are inconsistent."""
    order: list[int] = []
    row_len = None
    current = start
    heading = "right"
    while True:
        row = [current]
        while (nxt := graph.neighbor(current, heading)) is not None:
            current = nxt
            row.append(current)
        if row_len is None:
            row_len = len(row)
        elif len(row) != row_len:
            return None
        order.extend(row)
        down = graph.neighbor(current, "down")
        if down is None:
            break
        # the corner below the row end starts the next (reversed) row
        current = down
        heading = _OPPOSITE[heading]
    n_rows = len(order) // row_len if row_len else 0
    if row_len is None or row_len < 2 or n_rows < 2:
        return None
    return order


def reconstruct_boards(graph: ConnectionGraph) -> list[tuple[Checkerboard, list[int]]]:
    """Recover boards by snake traversal from right+down start corners.

    Returns (board, candidate index order) pairs; candidate indices follow
    snake order. Boards are accepted greedily largest-first and never share
    a candidate.
    """
    starts = [
        i for i, adj in enumerate(graph.adjacency)
        if set(adj.keys()) == {"right", "down"}
    ]
    starts.sort(key=lambda i: (graph.candidates[i].position[1],
                               graph.candidates[i].position[0]))
    attempts = []
    for s in starts:
        order = _trace_board(graph, s)
        if order is None:
            log.debug("start candidate %d: inconsistent rows, discarded", s)
            continue
        attempts.append((s, order))
    attempts.sort(key=lambda t: (-len(t[1]),
                                 graph.candidates[t[0]].position[1],
                                 graph.candidates[t[0]].position[0]))
    used: set[int] = set()
    boards = []
    for s, order in attempts:
        if used.intersection(order):
            continue
        used.update(order)
        # row length recomputed from the first row of the traversal
        cols = 1
        cur = s
        while (nxt := graph.neighbor(cur, "right")) is not None:
            cur = nxt
            cols += 1
        rows = len(order) // cols
        flat = np.array([graph.candidates[i].position for i in order])
        board = Checkerboard.from_snake(rows, cols, flat)
        boards.append((board, order))
    return boards


def intersect_lines(a: Line, b: Line) -> np.ndarray:
    """Intersection point of two lines in Hessian normal form."""
    m = np.stack([a.normal, b.normal])
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if abs(det) < 1e-6:  # |det| = |sin(angle between normals)|
        raise DegenerateIntersectionError(
            f"lines nearly parallel (sin angle = {abs(det):.2e})")
    return np.linalg.solve(m, np.array([a.offset, b.offset]))


CORNER_TRIM_RADIUS = 3.0


def _trim_chain_ends(points: np.ndarray, directions: np.ndarray,
                     radius: float = CORNER_TRIM_RADIUS
                     ) -> tuple[np.ndarray, np.ndarray]:
    """Drop points within ``radius`` of either end of an ordered chain.

    Keeps everything when trimming would leave fewer than five points.
    """
    d_first = np.linalg.norm(points - points[0], axis=1)
    d_last = np.linalg.norm(points - points[-1], axis=1)
    keep = (d_first > radius) & (d_last > radius)
    if keep.sum() < 5:
        return points, directions
    return points[keep], directions[keep]


def refine_corner_by_intersection(candidate: CornerCandidate,
                                  segments: list[EdgeSegment],
                                  dist_threshold: float = DEFAULT_DIST_THRESHOLD,
                                  angle_tolerance: float = DEFAULT_ANGLE_TOLERANCE,
                                  rng: np.random.Generator | int | None = 0
                                  ) -> np.ndarray:
    """Corner as the intersection of the horizontal and vertical line fits.

    Points of the horizontal-class incident segments (the collinear
    neighbors left and right of the corner) are pooled for one line, the
    vertical-class segments for the other; each pool is fitted with RANSAC.
    Points close to either chain end are dropped before fitting: the
    gradient there mixes both meeting edges and biases the edge locations
    by up to a pixel.
    """
    rng = np.random.default_rng(rng)
    pools = {"h": ([], []), "v": ([], [])}
    for si, _ in candidate.incident:
        seg = segments[si]
        key = "h" if seg.edge_class.is_horizontal else "v"
        pts, dirs = _trim_chain_ends(seg.points, seg.directions)
        pools[key][0].append(pts)
        pools[key][1].append(dirs)
    lines = {}
    for key, (pt_lists, dir_lists) in pools.items():
        if not pt_lists:
            raise DegenerateIntersectionError(
                f"no {'horizontal' if key == 'h' else 'vertical'} support")
        pts = np.concatenate(pt_lists, axis=0)
        dirs = np.concatenate(dir_lists, axis=0)
        lines[key], _ = fit_line_ransac(pts, dirs, dist_threshold,
                                        angle_tolerance, rng)
    return intersect_lines(lines["h"], lines["v"])


def detect_boards(img: np.ndarray,
                  abs_threshold: float | None = None,
                  proximity: float = DEFAULT_PROXIMITY,
                  length_ratio: float = DEFAULT_LENGTH_RATIO,
                  dist_threshold: float = DEFAULT_DIST_THRESHOLD,
                  angle_tolerance: float = DEFAULT_ANGLE_TOLERANCE,
                  seed: int = 0,
                  image_id: str = ""
                  ) -> tuple[list[Checkerboard], list[EdgeSegment]]:
    """Full detection pipeline: edges -> segments -> boards -> refinement.

    Corner positions in the returned boards are refined by line
    intersection; corners whose refinement degenerates keep the candidate
    centroid position.
    """
    from . import imagegrad
    from .edgesegments import group_segments
    from .errors import NumericalError as _NumErr

    if abs_threshold is None:
        abs_threshold = imagegrad.DEFAULT_ABS_THRESHOLD
    candidates_arr, _ = imagegrad.edge_candidates(img, abs_threshold)
    segments = group_segments(candidates_arr)
    corner_cands = find_corner_candidates(segments, proximity)
    graph = build_connection_graph(corner_cands, segments, length_ratio)
    boards = []
    rng = np.random.default_rng(seed)
    for board, order in reconstruct_boards(graph):
        flat = []
        for ci in order:
            cand = graph.candidates[ci]
            try:
                pos = refine_corner_by_intersection(
                    cand, segments, dist_threshold, angle_tolerance, rng)
            except _NumErr:
                pos = cand.position
            flat.append(pos)
        refined = Checkerboard.from_snake(board.rows, board.cols,
                                          np.array(flat), image_id=image_id)
        boards.append(refined)
    return boards, segments


def refine_corner_by_gradient(field_: GradientField,
                              corner: np.ndarray,
                              window: int = GRADIENT_WINDOW) -> np.ndarray:
    """Closed-form gradient-orthogonality corner refinement (comparator).

    Solves c = (sum g g^T)^-1 sum (g g^T) p over an odd square window of
    pixels centered on the rounded corner position.
    """
    if window % 2 == 0 or window > 11:
        raise NumericalError(f"window must be odd and <= 11, got {window}")
    h, w = field_.shape
    half = window // 2
    cx, cy = int(round(corner[0])), int(round(corner[1]))
    if cx - half < 0 or cy - half < 0 or cx + half >= w or cy + half >= h:
        raise NumericalError("refinement window outside image")
    ys, xs = np.mgrid[cy - half:cy + half + 1, cx - half:cx + half + 1]
    gx = field_.gx[ys, xs].ravel()
    gy = field_.gy[ys, xs].ravel()
    g = np.stack([gx, gy], axis=1)
    p = np.stack([xs.ravel(), ys.ravel()], axis=1).astype(np.float64)
    # sum of g g^T and of (g g^T) p
    a = g.T @ g
    b = np.einsum("ni,nj,nj->i", g, g, p)
    det = np.linalg.det(a)
    if det <= 0 or det < 1e-12 * np.trace(a) ** 2:
        raise NumericalError("singular gradient structure matrix")
    return np.linalg.solve(a, b)

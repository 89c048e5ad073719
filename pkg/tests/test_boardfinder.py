"""Board topology recovery and corner refinement."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import stereocal.synth as synth
from stereocal.boardfinder import (
    Checkerboard,
    CornerCandidate,
    build_connection_graph,
    detect_boards,
    find_corner_candidates,
    intersect_lines,
    reconstruct_boards,
    refine_corner_by_gradient,
    refine_corner_by_intersection,
)
from stereocal.edgesegments import EdgeClass, EdgeSegment, Line
from stereocal.errors import DegenerateIntersectionError, NumericalError
from stereocal.imagegrad import gaussian_smooth, sobel
from conftest import match_board_errors


def _segment(edge_class, p0, p1, n=11):
    """Straight synthetic segment from p0 to p1 with consistent gradients."""
    t = np.linspace(0.0, 1.0, n)[:, None]
    points = np.asarray(p0) + t * (np.asarray(p1) - np.asarray(p0))
    direction = {
        EdgeClass.HORIZONTAL_POSITIVE: np.pi / 2,
        EdgeClass.HORIZONTAL_NEGATIVE: -np.pi / 2,
        EdgeClass.VERTICAL_POSITIVE: 0.0,
        EdgeClass.VERTICAL_NEGATIVE: np.pi,
    }[edge_class]
    return EdgeSegment(edge_class=edge_class, points=points,
                       directions=np.full(n, direction))


def _h_class(i, j):
    return (EdgeClass.HORIZONTAL_POSITIVE if (i + j) % 2 == 0
            else EdgeClass.HORIZONTAL_NEGATIVE)


def _v_class(i, j):
    return (EdgeClass.VERTICAL_POSITIVE if (i + j) % 2 == 0
            else EdgeClass.VERTICAL_NEGATIVE)


def _grid_segments(rows, cols, spacing=10.0, origin=(10.0, 10.0),
                   drop_corner=None):
    """Square-side segments of a checkerboard with rows x cols inner corners.

    Every inner corner receives four segment ends (two horizontal classes,
    two vertical) exactly as a rendered board would produce: shared sides
    between adjacent corners plus outward stubs at the board border.
    """
    ox, oy = origin
    segs = []

    def corner(i, j):
        return (ox + j * spacing, oy + i * spacing)

    def keep(i, j):
        return (i, j) != drop_corner

    for i in range(rows):
        for j in range(-1, cols):
            a = (i, j) if 0 <= j else None
            b = (i, j + 1) if j + 1 < cols else None
            if a is None and b is None:
                continue
            if (a and not keep(*a)) or (b and not keep(*b)):
                continue
            p0 = corner(i, j) if a else corner(i, 0) - np.array([spacing, 0])
            p1 = corner(i, j + 1) if b else \
                corner(i, cols - 1) + np.array([spacing, 0])
            segs.append(_segment(_h_class(i, j), p0, p1))
    for j in range(cols):
        for i in range(-1, rows):
            a = (i, j) if 0 <= i else None
            b = (i + 1, j) if i + 1 < rows else None
            if a is None and b is None:
                continue
            if (a and not keep(*a)) or (b and not keep(*b)):
                continue
            p0 = corner(i, j) if a else corner(0, j) - np.array([0, spacing])
            p1 = corner(i + 1, j) if b else \
                corner(rows - 1, j) + np.array([0, spacing])
            segs.append(_segment(_v_class(i, j), p0, p1))
    return segs


class TestIntersectLines:
    def test_axes_meet_at_origin(self):
        x_axis = Line(normal=np.array([0.0, 1.0]), offset=0.0)
        y_axis = Line(normal=np.array([1.0, 0.0]), offset=0.0)
        assert np.allclose(intersect_lines(x_axis, y_axis), [0.0, 0.0])

    def test_axis_parallel_lines(self):
        a = Line(normal=np.array([1.0, 0.0]), offset=2.0)
        b = Line(normal=np.array([0.0, 1.0]), offset=3.0)
        assert np.allclose(intersect_lines(a, b), [2.0, 3.0])

    def test_diagonal_lines(self):
        s = 1.0 / np.sqrt(2.0)
        a = Line(normal=np.array([s, s]), offset=np.sqrt(2.0))
        b = Line(normal=np.array([s, -s]), offset=0.0)
        assert np.allclose(intersect_lines(a, b), [1.0, 1.0])

    def test_parallel_rejected(self):
        a = Line(normal=np.array([0.0, 1.0]), offset=1.0)
        b = Line(normal=np.array([0.0, 1.0]), offset=2.0)
        with pytest.raises(DegenerateIntersectionError):
            intersect_lines(a, b)


class TestSnakeOrder:
    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 8), st.integers(2, 8))
    def test_round_trip(self, rows, cols):
        grid = np.arange(rows * cols * 2, dtype=float).reshape(rows, cols, 2)
        board = Checkerboard(rows=rows, cols=cols, corners=grid)
        flat = board.snake_order()
        back = Checkerboard.from_snake(rows, cols, flat)
        assert np.array_equal(back.corners, grid)

    @given(st.integers(2, 8), st.integers(2, 8))
    def test_index_mapping(self, rows, cols):
        grid = np.dstack(np.meshgrid(np.arange(cols), np.arange(rows))
                         ).astype(float)
        board = Checkerboard(rows=rows, cols=cols, corners=grid)
        flat = board.snake_order()
        for r in range(rows):
            for c in range(cols):
                pos = r * cols + (c if r % 2 == 0 else cols - 1 - c)
                assert np.array_equal(flat[pos], grid[r, c])


class TestFindCornerCandidates:
    def test_four_classes_meeting(self):
        segs = [
            _segment(EdgeClass.HORIZONTAL_POSITIVE, (0, 10), (10, 10)),
            _segment(EdgeClass.HORIZONTAL_NEGATIVE, (10, 10), (20, 10)),
            _segment(EdgeClass.VERTICAL_POSITIVE, (10, 0), (10, 10)),
            _segment(EdgeClass.VERTICAL_NEGATIVE, (10, 10), (10, 20)),
        ]
        cands = find_corner_candidates(segs)
        assert len(cands) == 1
        assert np.linalg.norm(cands[0].position - [10, 10]) <= 3.0

    def test_same_class_pair_rejected(self):
        segs = [
            _segment(EdgeClass.HORIZONTAL_POSITIVE, (0, 10), (10, 10)),
            _segment(EdgeClass.HORIZONTAL_POSITIVE, (10, 10), (20, 10)),
        ]
        assert find_corner_candidates(segs) == []

    def test_empty_input(self):
        assert find_corner_candidates([]) == []

    def test_full_board_candidate_count(self):
        segs = _grid_segments(5, 6)
        assert len(find_corner_candidates(segs)) == 30


class TestConnectionGraph:
    def test_grid_graph_edges(self):
        segs = _grid_segments(5, 6)
        cands = find_corner_candidates(segs)
        graph = build_connection_graph(cands, segs)
        n_edges = sum(len(adj) for adj in graph.adjacency) // 2
        # 5x6 grid graph: 5*5 horizontal + 4*6 vertical edges
        assert n_edges == 49

    def test_dissimilar_lengths_not_connected(self):
        long = _segment(EdgeClass.HORIZONTAL_POSITIVE, (10, 10), (110, 10))
        segs = [
            _segment(EdgeClass.HORIZONTAL_NEGATIVE, (-10, 10), (10, 10)),
            long,
            _segment(EdgeClass.HORIZONTAL_NEGATIVE, (110, 10), (130, 10)),
            _segment(EdgeClass.VERTICAL_POSITIVE, (10, -10), (10, 10)),
            _segment(EdgeClass.VERTICAL_NEGATIVE, (10, 10), (10, 30)),
            _segment(EdgeClass.VERTICAL_POSITIVE, (110, 10), (110, 30)),
            _segment(EdgeClass.VERTICAL_NEGATIVE, (110, -10), (110, 10)),
        ]
        cands = find_corner_candidates(segs)
        assert len(cands) == 2
        graph = build_connection_graph(cands, segs, length_ratio=2.0)
        assert all(len(adj) == 0 or all(
            segs[si] is not long for _, si in adj.values())
            for adj in graph.adjacency)

    def test_compatible_lengths_connected(self):
        segs = _grid_segments(2, 2)
        cands = find_corner_candidates(segs)
        graph = build_connection_graph(cands, segs)
        n_edges = sum(len(adj) for adj in graph.adjacency) // 2
        assert n_edges == 4


class TestReconstructBoards:
    def test_two_by_two_snake(self):
        segs = _grid_segments(2, 2, spacing=10.0, origin=(10.0, 10.0))
        cands = find_corner_candidates(segs)
        graph = build_connection_graph(cands, segs)
        boards = reconstruct_boards(graph)
        assert len(boards) == 1
        board, order = boards[0]
        assert (board.rows, board.cols) == (2, 2)
        flat = board.snake_order()
        expected = np.array([[10, 10], [20, 10], [20, 20], [10, 20]])
        assert np.allclose(flat, expected, atol=1e-9)

    def test_missing_corner_discards_component(self):
        segs = _grid_segments(2, 3, drop_corner=(1, 2))
        cands = find_corner_candidates(segs)
        graph = build_connection_graph(cands, segs)
        assert reconstruct_boards(graph) == []

    def test_boards_never_share_candidates(self):
        segs = (_grid_segments(2, 2, origin=(10.0, 10.0))
                + _grid_segments(3, 3, origin=(100.0, 10.0)))
        cands = find_corner_candidates(segs)
        graph = build_connection_graph(cands, segs)
        boards = reconstruct_boards(graph)
        assert len(boards) == 2
        used = [i for _, order in boards for i in order]
        assert len(used) == len(set(used))


class TestRefineByIntersection:
    def _corner_setup(self, shift=np.zeros(2)):
        segs = [
            _segment(EdgeClass.HORIZONTAL_POSITIVE,
                     (-15 + shift[0], 7 + shift[1]), (5 + shift[0], 7 + shift[1]), n=21),
            _segment(EdgeClass.HORIZONTAL_NEGATIVE,
                     (5 + shift[0], 7 + shift[1]), (25 + shift[0], 7 + shift[1]), n=21),
            _segment(EdgeClass.VERTICAL_POSITIVE,
                     (5 + shift[0], -13 + shift[1]), (5 + shift[0], 7 + shift[1]), n=21),
            _segment(EdgeClass.VERTICAL_NEGATIVE,
                     (5 + shift[0], 7 + shift[1]), (5 + shift[0], 27 + shift[1]), n=21),
        ]
        cand = CornerCandidate(position=np.array([5.0, 7.0]) + shift,
                               incident=[(i, 0) for i in range(4)])
        return cand, segs

    def test_axis_aligned_corner(self):
        cand, segs = self._corner_setup()
        pos = refine_corner_by_intersection(cand, segs)
        assert np.allclose(pos, [5.0, 7.0], atol=1e-9)

    def test_translation_equivariance(self):
        cand0, segs0 = self._corner_setup()
        t = np.array([3.25, -1.5])
        cand1, segs1 = self._corner_setup(shift=t)
        p0 = refine_corner_by_intersection(cand0, segs0, rng=0)
        p1 = refine_corner_by_intersection(cand1, segs1, rng=0)
        assert np.allclose(p1, p0 + t, atol=1e-9)


class TestRefineByGradient:
    def test_constant_image_singular(self):
        field = sobel(np.full((20, 20), 0.5))
        with pytest.raises(NumericalError):
            refine_corner_by_gradient(field, np.array([10.0, 10.0]))

    def test_even_window_rejected(self):
        field = sobel(np.zeros((20, 20)))
        with pytest.raises(NumericalError):
            refine_corner_by_gradient(field, np.array([10.0, 10.0]), window=8)

    def test_symmetric_corner_returns_center(self):
        img = np.full((21, 21), 0.9)
        img[:10, :10] = 0.1
        img[11:, 11:] = 0.1
        field = sobel(gaussian_smooth(img))
        pos = refine_corner_by_gradient(field, np.array([10.0, 10.0]),
                                        window=9)
        assert np.linalg.norm(pos - [10.0, 10.0]) < 0.2


class TestDetectBoards:
    def test_single_rendered_board(self, single_board_scene,
                                   single_board_image):
        boards, segments = detect_boards(single_board_image)
        assert len(boards) == 1
        assert {(b.rows, b.cols) for b in boards} <= {(5, 6), (6, 5)}
        gts = synth.ground_truth_corners(single_board_scene, "left")
        errs, _ = match_board_errors(boards, gts)
        assert errs.mean() < 0.05

    def test_deterministic(self, single_board_image):
        b1, _ = detect_boards(single_board_image, seed=0)
        b2, _ = detect_boards(single_board_image, seed=0)
        assert all(np.array_equal(a.corners, b.corners)
                   for a, b in zip(b1, b2))

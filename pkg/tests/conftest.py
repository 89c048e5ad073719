"""Shared fixtures: rendered synthetic scenes are expensive, so they are
session-scoped and reused across test modules."""

from __future__ import annotations

import numpy as np
import pytest

import stereocal.synth as synth


@pytest.fixture(scope="session")
def kitti_scene():
    return synth.kitti_like_layout()


@pytest.fixture(scope="session")
def kitti_render(kitti_scene):
    """(left, right, ground-truth corners) for the clean 12-board scene."""
    return synth.render(kitti_scene)


@pytest.fixture(scope="session")
def single_board_scene():
    """One nearly fronto-parallel 5x6 board filling the image center."""
    rig = synth.default_rig()
    board = synth.BoardSpec(
        rows=5, cols=6, square_size=0.1,
        pose=synth._tilted_pose(0.0, 0.0, 5.0, 0.08, 0.09, 0.05,
                                board_w=0.7, board_h=0.6))
    return synth.SceneSpec(boards=[board], rig=rig, image_size=(1392, 512))


@pytest.fixture(scope="session")
def single_board_image(single_board_scene):
    return synth.render_camera(single_board_scene, "left")


def match_board_errors(boards, gts):
    """Per-corner distances between detected boards and ground truth.

    Each ground-truth board is paired with the nearest detected board by
    centroid; detected snake order may be flipped end-to-end relative to
    ground truth, so the better of the two orientations is used.
    """
    errs, pairs = [], []
    for gt in gts:
        cen = gt.reshape(-1, 2).mean(axis=0)
        b = min(boards, key=lambda b: np.linalg.norm(
            b.corners.reshape(-1, 2).mean(axis=0) - cen))
        g = gt if np.linalg.norm(b.corners - gt) <= np.linalg.norm(
            b.corners - gt[::-1, ::-1]) else gt[::-1, ::-1]
        errs.append(np.linalg.norm(b.corners - g, axis=-1).ravel())
        pairs.append((b.corners.reshape(-1, 2), g.reshape(-1, 2)))
    return np.concatenate(errs), pairs

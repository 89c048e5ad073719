"""Synthetic scene rendering and its exact ground-truth corner oracle."""

from __future__ import annotations

import numpy as np

import stereocal.synth as synth
from stereocal.cameramodel import project


class TestKittiLikeLayout:
    def test_twelve_boards(self, kitti_scene):
        assert len(kitti_scene.boards) == 12

    def test_all_boards_beyond_three_meters(self, kitti_scene):
        for board in kitti_scene.boards:
            assert board.pose.translation[2] > 3.0

    def test_one_board_flagged_bent(self, kitti_scene):
        assert sum(b.flagged_bent for b in kitti_scene.boards) == 1

    def test_rig_matches_defaults(self, kitti_scene):
        rig = kitti_scene.rig
        assert rig.left.fx == 975.0
        assert np.isclose(rig.baseline, 0.539)


class TestDiverseLayout:
    def test_at_least_twelve_poses(self):
        scene = synth.diverse_layout()
        assert len(scene.boards) >= 12

    def test_contains_close_board(self):
        scene = synth.diverse_layout()
        assert min(b.pose.translation[2] for b in scene.boards) < 1.5


class TestGroundTruth:
    def test_corners_equal_exact_projection(self, kitti_scene):
        gts = synth.ground_truth_corners(kitti_scene, "left")
        for board, gt in zip(kitti_scene.boards, gts):
            pts = board.pose.apply(board.corner_points())
            proj = project(pts.reshape(-1, 3), kitti_scene.rig.left)
            assert np.allclose(gt.reshape(-1, 2), proj, atol=1e-12)

    def test_right_camera_uses_relative_pose(self, kitti_scene):
        gts = synth.ground_truth_corners(kitti_scene, "right")
        rig = kitti_scene.rig
        board = kitti_scene.boards[0]
        pts = rig.right_pose.apply(
            board.pose.apply(board.corner_points()).reshape(-1, 3))
        assert np.allclose(gts[0].reshape(-1, 2), project(pts, rig.right),
                           atol=1e-12)

    def test_fronto_parallel_board_is_affine_grid(self):
        rig = synth.default_rig()
        board = synth.BoardSpec(rows=4, cols=5, square_size=0.1,
                                pose=synth.Pose(np.eye(3),
                                                np.array([0.0, 0.0, 5.0])))
        scene = synth.SceneSpec(boards=[board], rig=rig,
                                image_size=(1392, 512))
        gt = synth.ground_truth_corners(scene, "left")[0]
        dx = np.diff(gt[:, :, 0], axis=1)
        dy = np.diff(gt[:, :, 1], axis=0)
        assert np.allclose(dx, dx.flat[0], atol=1e-9)
        assert np.allclose(dy, dy.flat[0], atol=1e-9)

    def test_noise_requires_rng(self, kitti_scene):
        noisy = synth.kitti_like_layout(corner_noise_sigma=0.03)
        rng = np.random.default_rng(0)
        boards = synth.ground_truth_boards(noisy, "left", rng)
        clean = synth.ground_truth_boards(kitti_scene, "left")
        deltas = [np.linalg.norm(a.corners - b.corners, axis=-1)
                  for a, b in zip(boards, clean)]
        all_d = np.concatenate([d.ravel() for d in deltas])
        assert 0.0 < all_d.mean() < 0.1


class TestRender:
    def test_deterministic(self, single_board_scene):
        a = synth.render_camera(single_board_scene, "left")
        b = synth.render_camera(single_board_scene, "left")
        assert np.array_equal(a, b)

    def test_intensity_levels(self, single_board_image):
        img = single_board_image
        assert img.min() >= 0.0 and img.max() <= 1.0
        assert np.isclose(img.max(), synth.WHITE, atol=0.05)
        assert np.isclose(img.min(), synth.BLACK, atol=0.05)

    def test_balanced_black_white_area(self, single_board_scene,
                                       single_board_image):
        # dilation 0: black and white checker areas agree within tolerance.
        # Restricted to the inner-corner bounding box, which holds an even
        # count of full squares; the white board margin is excluded.
        img = single_board_image
        gt = synth.ground_truth_corners(single_board_scene, "left")[0]
        flat = gt.reshape(-1, 2)
        x0, y0 = np.ceil(flat.min(axis=0)).astype(int)
        x1, y1 = np.floor(flat.max(axis=0)).astype(int)
        box = img[y0:y1, x0:x1]
        black = np.count_nonzero(box < 0.3)
        white = np.count_nonzero(box > 0.7)
        assert abs(black - white) / max(black, white) < 0.06

    def test_dilation_grows_white_area(self, single_board_scene):
        import dataclasses
        dilated = dataclasses.replace(single_board_scene,
                                      white_dilation_px=0.5)
        img0 = synth.render_camera(single_board_scene, "left")
        img1 = synth.render_camera(dilated, "left")
        assert np.count_nonzero(img1 > 0.7) > np.count_nonzero(img0 > 0.7)

    def test_render_pair_matches_single_camera(self, kitti_scene,
                                               kitti_render):
        left, right, gts = kitti_render
        assert np.array_equal(left,
                              synth.render_camera(kitti_scene, "left"))
        assert len(gts["left"]) == len(gts["right"]) == 12

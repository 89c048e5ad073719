"""Pinhole model with radial-tangential distortion, rectification, and the
rectified-feature coordinate converter."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stereocal.cameramodel import (
    Intrinsics,
    Pose,
    StereoRig,
    convert_feature,
    distort,
    project,
    raw_to_rectified,
    rectification_map,
    rectified_to_raw,
    remap,
    stereo_rectify,
    undistort,
)
from stereocal.errors import InvalidInputError


def _plain_intrinsics(**kw):
    base = dict(fx=975.0, fy=975.0, cu=700.0, cv=247.0,
                k1=0.0, k2=0.0, k3=0.0, k4=0.0, k5=0.0)
    base.update(kw)
    return Intrinsics(**base)


class TestDistort:
    def test_zero_coefficients_identity(self):
        intr = _plain_intrinsics()
        pts = np.array([[0.1, -0.2], [0.0, 0.3]])
        assert np.allclose(distort(pts, intr), pts)

    def test_origin_fixed_point(self):
        intr = _plain_intrinsics(k1=-0.37, k2=0.2, k3=1e-3, k4=-1e-3, k5=0.1)
        assert np.allclose(distort(np.zeros((1, 2)), intr), 0.0)

    def test_radial_only_formula(self):
        intr = _plain_intrinsics(k1=-0.37)
        out = distort(np.array([[0.1, 0.2]]), intr)
        assert np.allclose(out, [[0.09815, 0.19630]], atol=1e-12)


class TestUndistort:
    def test_zero_coefficients_back_projection(self):
        intr = _plain_intrinsics()
        norm = undistort(np.array([[797.5, 344.5]]), intr)
        assert np.allclose(norm, [[0.1, 0.1]])

    def test_principal_point_maps_to_origin(self):
        intr = _plain_intrinsics(k1=-0.37, k2=0.2)
        norm = undistort(np.array([[700.0, 247.0]]), intr)
        assert np.allclose(norm, 0.0, atol=1e-12)

    def test_round_trip(self):
        intr = _plain_intrinsics(k1=-0.37, k2=0.19, k3=2e-4, k4=-1e-4,
                                 k5=-0.07)
        rng = np.random.default_rng(0)
        norm = rng.uniform(-0.3, 0.3, (1000, 2))
        d = distort(norm, intr)
        pix = np.stack([intr.fx * d[:, 0] + intr.cu,
                        intr.fy * d[:, 1] + intr.cv], axis=-1)
        back = undistort(pix, intr)
        assert np.abs(back - norm).max() < 1e-8


class TestProject:
    def test_optical_axis_hits_principal_point(self):
        intr = _plain_intrinsics()
        assert np.allclose(project(np.array([[0.0, 0.0, 1.0]]), intr),
                           [[700.0, 247.0]])

    def test_unit_offset_point(self):
        intr = _plain_intrinsics()
        assert np.allclose(project(np.array([[1.0, 0.0, 1.0]]), intr),
                           [[1675.0, 247.0]])

    def test_scale_invariance(self):
        intr = _plain_intrinsics(k1=-0.3)
        p = np.array([[0.4, -0.2, 2.0]])
        assert np.allclose(project(p, intr), project(3.0 * p, intr))

    def test_behind_camera_rejected(self):
        intr = _plain_intrinsics()
        with pytest.raises(InvalidInputError):
            project(np.array([[0.0, 0.0, -1.0]]), intr)

    def test_matches_distort_composition(self):
        intr = _plain_intrinsics(k1=-0.37, k2=0.2)
        p = np.array([[0.5, -0.3, 2.5]])
        d = distort(p[:, :2] / p[:, 2:], intr)
        expected = np.stack([intr.fx * d[:, 0] + intr.cu,
                             intr.fy * d[:, 1] + intr.cv], axis=-1)
        assert np.allclose(project(p, intr), expected)


class TestPose:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_compose_inverse_is_identity(self, seed):
        rng = np.random.default_rng(seed)
        rv = rng.normal(0, 0.5, 3)
        angle = np.linalg.norm(rv)
        axis = rv / angle if angle > 0 else np.array([1.0, 0.0, 0.0])
        k = np.array([[0, -axis[2], axis[1]],
                      [axis[2], 0, -axis[0]],
                      [-axis[1], axis[0], 0]])
        r = np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)
        pose = Pose(rotation=r, translation=rng.normal(0, 1, 3))
        ident = pose.compose(pose.inverse())
        assert np.allclose(ident.rotation, np.eye(3), atol=1e-10)
        assert np.allclose(ident.translation, 0.0, atol=1e-10)

    def test_orthonormalized_restores_rotation(self):
        r = np.eye(3) + 1e-4 * np.random.default_rng(1).normal(size=(3, 3))
        fixed = Pose(rotation=r, translation=np.zeros(3)).orthonormalized()
        assert np.allclose(fixed.rotation @ fixed.rotation.T, np.eye(3),
                           atol=1e-12)
        assert np.isclose(np.linalg.det(fixed.rotation), 1.0)


class TestStereoRectify:
    def _rig(self, rotation=None, t=None):
        rotation = np.eye(3) if rotation is None else rotation
        t = np.array([-0.539, 0.0, 0.0]) if t is None else t
        return StereoRig(left=_plain_intrinsics(),
                         right=_plain_intrinsics(),
                         right_pose=Pose(rotation=rotation, translation=t))

    def test_already_rectified_rig(self):
        left, right = stereo_rectify(self._rig())
        assert np.allclose(left.r_rect, np.eye(3), atol=1e-12)
        assert np.allclose(right.r_rect, np.eye(3), atol=1e-12)

    def test_right_projection_baseline_term(self):
        _, right = stereo_rectify(self._rig())
        assert np.isclose(right.p_rect[0, 3], -975.0 * 0.539)

    def test_zero_baseline_rejected(self):
        with pytest.raises(InvalidInputError):
            stereo_rectify(self._rig(t=np.zeros(3)))

    def test_epipolar_alignment_with_yaw(self):
        ang = np.deg2rad(1.0)
        rot = np.array([[np.cos(ang), 0, np.sin(ang)],
                        [0, 1, 0],
                        [-np.sin(ang), 0, np.cos(ang)]])
        rig = self._rig(rotation=rot)
        left, right = stereo_rectify(rig)
        rng = np.random.default_rng(2)
        pts = rng.uniform([-1.5, -0.4, 4.0], [1.5, 0.4, 8.0], (50, 3))
        vl = raw_to_rectified(project(pts, rig.left), left)
        in_right = rig.right_pose.apply(pts)
        vr = raw_to_rectified(project(in_right, rig.right), right)
        assert np.abs(vl[:, 1] - vr[:, 1]).max() < 0.05


class TestRectificationMap:
    def test_identity_calibration_identity_map(self):
        rig = StereoRig(left=_plain_intrinsics(), right=_plain_intrinsics(),
                        right_pose=Pose(np.eye(3),
                                        np.array([-0.5, 0.0, 0.0])))
        left, _ = stereo_rectify(rig)
        m = rectification_map(left, (32, 16))
        xs, ys = np.meshgrid(np.arange(32), np.arange(16))
        assert np.abs(m[..., 0] - xs).max() < 1e-9
        assert np.abs(m[..., 1] - ys).max() < 1e-9

    def test_remap_identity(self):
        rng = np.random.default_rng(4)
        img = rng.uniform(size=(16, 32))
        xs, ys = np.meshgrid(np.arange(32.0), np.arange(16.0))
        m = np.stack([xs, ys], axis=-1)
        assert np.allclose(remap(img, m), img)


class TestConvertFeature:
    def _calib(self, **kw):
        rig = StereoRig(left=_plain_intrinsics(k1=-0.3, k2=0.1, **kw),
                        right=_plain_intrinsics(),
                        right_pose=Pose(np.eye(3),
                                        np.array([-0.539, 0.002, -0.001])))
        return stereo_rectify(rig)[0]

    def test_identity_round_trip(self):
        calib = self._calib()
        rng = np.random.default_rng(3)
        pts = rng.uniform([100, 100], [1200, 400], (200, 2))
        out = convert_feature(pts, calib, calib)
        assert np.abs(out - pts).max() < 1e-6

    def test_principal_point_shift(self):
        rig = StereoRig(left=_plain_intrinsics(), right=_plain_intrinsics(),
                        right_pose=Pose(np.eye(3),
                                        np.array([-0.539, 0.0, 0.0])))
        default = stereo_rectify(rig)[0]
        # same rectified frame, raw principal point moved 5 px right
        custom = replace(default, intrinsics=_plain_intrinsics(cu=705.0))
        pts = np.array([[700.0, 247.0], [500.0, 300.0]])
        out = convert_feature(pts, default, custom)
        assert np.allclose(out[:, 0] - pts[:, 0], -5.0, atol=1e-6)
        assert np.allclose(out[:, 1], pts[:, 1], atol=1e-6)

    def test_rectified_raw_round_trip(self):
        calib = self._calib()
        rng = np.random.default_rng(9)
        pts = rng.uniform([100, 100], [1200, 400], (100, 2))
        back = raw_to_rectified(rectified_to_raw(pts, calib), calib)
        assert np.abs(back - pts).max() < 1e-6

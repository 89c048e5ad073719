"""Gradient front-end: grayscale conversion, smoothing, Sobel, suppression
and subpixel edge localization."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stereocal.errors import InvalidInputError
from stereocal.imagegrad import (
    GAUSSIAN_SIZE,
    bilinear_sample,
    edge_candidates,
    gaussian_kernel,
    gaussian_smooth,
    parabolic_offset,
    sobel,
    subpixel_localize,
    suppress,
    to_float_gray,
)


class TestToFloatGray:
    def test_all_white(self):
        img = to_float_gray(np.full((4, 4), 255, dtype=np.uint8))
        assert np.all(img == 1.0)

    def test_all_black(self):
        img = to_float_gray(np.zeros((4, 4), dtype=np.uint8))
        assert np.all(img == 0.0)

    def test_linear_scaling(self):
        img = to_float_gray(np.array([[0, 128]], dtype=np.uint8))
        assert np.allclose(img, [[0.0, 128 / 255]])

    def test_rgb_luminance(self):
        rgb = np.zeros((2, 2, 3), dtype=np.uint8)
        rgb[..., 1] = 255
        img = to_float_gray(rgb)
        assert np.allclose(img, 0.587)

    def test_empty_raster_rejected(self):
        with pytest.raises(InvalidInputError):
            to_float_gray(np.zeros((0, 5), dtype=np.uint8))


class TestGaussianSmooth:
    def test_constant_preserved(self):
        img = np.full((8, 8), 0.37)
        assert np.allclose(gaussian_smooth(img), 0.37)

    def test_impulse_yields_kernel(self):
        img = np.zeros((11, 11))
        img[5, 5] = 1.0
        out = gaussian_smooth(img)
        k = gaussian_kernel()
        expected = np.outer(k, k)
        assert np.allclose(out[3:8, 3:8], expected, atol=1e-12)

    def test_ramp_preserved_interior(self):
        x = np.arange(20) / 20.0
        img = np.tile(x, (10, 1))
        out = gaussian_smooth(img)
        assert np.allclose(out[2:-2, 3:-3], img[2:-2, 3:-3], atol=1e-12)

    def test_too_small_rejected(self):
        with pytest.raises(InvalidInputError):
            gaussian_smooth(np.zeros((4, 10)))

    def test_kernel_sums_to_one(self):
        assert np.isclose(gaussian_kernel(GAUSSIAN_SIZE).sum(), 1.0)


class TestSobel:
    def test_constant_zero_magnitude(self):
        f = sobel(np.full((8, 8), 0.5))
        assert np.allclose(f.magnitude, 0.0)

    def test_step_edge_direction(self):
        img = np.zeros((10, 10))
        img[:, 5:] = 1.0
        f = sobel(img)
        interior = f.direction[2:-2, 4:6][f.magnitude[2:-2, 4:6] > 0.1]
        assert np.allclose(interior, 0.0, atol=1e-12)

    def test_ramp_gradient_value(self):
        w = 32
        img = np.tile(np.arange(w) / w, (10, 1))
        f = sobel(img)
        assert np.allclose(f.gx[2:-2, 2:-2], 8.0 / w, atol=1e-12)
        assert np.allclose(f.gy[2:-2, 2:-2], 0.0, atol=1e-12)

    def test_magnitude_direction_consistent(self):
        rng = np.random.default_rng(0)
        f = sobel(rng.uniform(size=(12, 12)))
        assert np.allclose(f.magnitude, np.hypot(f.gx, f.gy))
        assert np.allclose(f.direction, np.arctan2(f.gy, f.gx))


class TestSuppress:
    def test_constant_image_empty(self):
        f = sobel(np.full((10, 10), 0.5))
        assert len(suppress(f, 0.01)) == 0

    def test_threshold_above_max_empty(self):
        rng = np.random.default_rng(1)
        f = sobel(rng.uniform(size=(12, 12)))
        assert len(suppress(f, f.magnitude.max() + 1.0)) == 0

    def test_step_edge_one_per_row(self):
        img = np.zeros((20, 20))
        img[:, 10:] = 1.0
        cands = suppress(sobel(gaussian_smooth(img)), 0.05)
        rows = cands.pixel[:, 1]
        interior = rows[(rows >= 3) & (rows < 17)]
        counts = np.bincount(interior, minlength=20)[3:17]
        assert np.all(counts == 1)

    def test_negative_threshold_rejected(self):
        f = sobel(np.zeros((8, 8)))
        with pytest.raises(InvalidInputError):
            suppress(f, -0.1)

    def test_no_adjacent_survivors_along_gradient(self):
        img = np.zeros((20, 20))
        img[:, 10:] = 1.0
        cands = suppress(sobel(gaussian_smooth(img)), 0.05)
        cols = {}
        for x, y in cands.pixel:
            cols.setdefault(y, []).append(x)
        for xs in cols.values():
            xs = sorted(xs)
            assert all(b - a > 1 for a, b in zip(xs, xs[1:]))


class TestParabolicOffset:
    def test_symmetric_zero(self):
        off, ok = parabolic_offset(np.array([1.0]), np.array([2.0]),
                                   np.array([1.0]))
        assert ok[0] and off[0] == 0.0

    def test_asymmetric_vertex(self):
        off, ok = parabolic_offset(np.array([1.0]), np.array([2.0]),
                                   np.array([1.5]))
        assert ok[0]
        assert np.isclose(off[0], (1.0 - 1.5) / (2 * (1.0 - 4.0 + 1.5)))
        assert np.isclose(off[0], 1 / 6, atol=1e-12)

    def test_non_concave_flagged(self):
        off, ok = parabolic_offset(np.array([2.0]), np.array([1.0]),
                                   np.array([2.0]))
        assert not ok[0] and off[0] == 0.0

    @given(st.floats(0.0, 10.0), st.floats(0.0, 10.0), st.floats(0.0, 10.0))
    def test_offset_bounded(self, a, b, c):
        off, _ = parabolic_offset(np.array([a]), np.array([b]), np.array([c]))
        assert abs(off[0]) <= 0.5


class TestSubpixelLocalize:
    def test_never_moves_more_than_half_pixel(self):
        rng = np.random.default_rng(2)
        img = gaussian_smooth(rng.uniform(size=(30, 30)))
        f = sobel(img)
        cands = suppress(f, 0.01)
        refined = subpixel_localize(f, cands)
        shift = np.linalg.norm(
            refined.position - cands.pixel.astype(float), axis=1)
        assert np.all(shift <= 0.5 + 1e-12)

    def test_antialiased_step_edge_accuracy(self):
        # edge at known subpixel phase: mean localization error < 0.05 px
        phase = 10.37
        xs = np.arange(40)
        cover = np.clip(xs + 0.5 - phase, 0.0, 1.0)
        img = np.tile(cover, (20, 1))
        cands, f = edge_candidates(img, 0.05)
        on_edge = np.abs(cands.position[:, 0] - phase) < 1.5
        err = np.abs(cands.position[on_edge, 0] - phase)
        assert len(err) > 5
        assert err.mean() < 0.05


class TestTranslationEquivariance:
    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 1000))
    def test_shift_by_one_pixel(self, seed):
        rng = np.random.default_rng(seed)
        img = rng.uniform(size=(16, 20))
        shifted = np.roll(img, 1, axis=1)
        a = sobel(gaussian_smooth(img))
        b = sobel(gaussian_smooth(shifted))
        assert np.allclose(a.gx[4:-4, 4:-5], b.gx[4:-4, 5:-4])
        assert np.allclose(a.gy[4:-4, 4:-5], b.gy[4:-4, 5:-4])


def test_bilinear_sample_interpolates():
    img = np.array([[0.0, 1.0], [2.0, 3.0]])
    v = bilinear_sample(img, np.array([0.5]), np.array([0.5]))
    assert np.isclose(v[0], 1.5)

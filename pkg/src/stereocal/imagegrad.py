"""Floating-point image conversion, gradients and subpixel edge candidates.

Images are 2-D float64 arrays in [0, 1], indexed [row, col]; subpixel
positions are (x, y) with x along columns and y along rows, pixel centers
at integer coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import InvalidInputError

FloatImage = np.ndarray

GAUSSIAN_SIGMA = 1.0
GAUSSIAN_SIZE = 5
DEFAULT_ABS_THRESHOLD = 0.04
BORDER_MARGIN = 3

# luminance weights for RGB collapse (ITU-R BT.601)
_LUMA = np.array([0.299, 0.587, 0.114])

_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T


@dataclass
class GradientField:
    """Per-pixel image derivatives, gradient magnitude and direction."""

    gx: np.ndarray
    gy: np.ndarray
    magnitude: np.ndarray
    direction: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.magnitude.shape


@dataclass
class EdgeCandidates:
    """Array-of-struct view of edge candidates surviving suppression.

    ``pixel`` holds the integer source pixel (x, y); ``position`` the
    (possibly subpixel-refined) location; ``refined`` marks candidates whose
    parabolic fit succeeded.
    """

    pixel: np.ndarray      # (n, 2) int
    position: np.ndarray   # (n, 2) float
    direction: np.ndarray  # (n,)
    magnitude: np.ndarray  # (n,)
    refined: np.ndarray = field(default=None)  # (n,) bool

    def __post_init__(self):
        if self.refined is None:
            self.refined = np.zeros(len(self.direction), dtype=bool)

    def __len__(self) -> int:
        return len(self.direction)

    def take(self, idx) -> "EdgeCandidates":
        return EdgeCandidates(self.pixel[idx], self.position[idx],
                              self.direction[idx], self.magnitude[idx],
                              self.refined[idx])


def to_float_gray(raw: np.ndarray) -> FloatImage:
    """Convert an 8-bit grayscale or RGB raster to float64 in [0, 1]."""
    raw = np.asarray(raw)
    if raw.size == 0 or raw.ndim < 2 or min(raw.shape[:2]) == 0:
        raise InvalidInputError("empty or zero-dimension raster")
    if raw.ndim == 3:
        img = raw.astype(np.float64) @ _LUMA
    elif raw.ndim == 2:
        img = raw.astype(np.float64)
    else:
        raise InvalidInputError(f"unsupported raster shape {raw.shape}")
    if np.issubdtype(raw.dtype, np.integer):
        img = img / 255.0
    if not np.all(np.isfinite(img)):
        raise InvalidInputError("raster contains non-finite values")
    return np.clip(img, 0.0, 1.0)


def gaussian_kernel(size: int = GAUSSIAN_SIZE,
                    sigma: float = GAUSSIAN_SIGMA) -> np.ndarray:
    """Normalized 1-D Gaussian sampled at integer offsets."""
    half = size // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_smooth(img: FloatImage) -> FloatImage:
    """Separable 5x5 Gaussian blur with edge replication."""
    if img.shape[0] < GAUSSIAN_SIZE or img.shape[1] < GAUSSIAN_SIZE:
        raise InvalidInputError(
            f"image {img.shape} smaller than {GAUSSIAN_SIZE}x{GAUSSIAN_SIZE} kernel")
    k = gaussian_kernel()
    out = ndimage.correlate1d(img, k, axis=0, mode="nearest")
    out = ndimage.correlate1d(out, k, axis=1, mode="nearest")
    return out


def sobel(img: FloatImage) -> GradientField:
    """3x3 Sobel derivatives plus magnitude/direction per pixel."""
    gx = ndimage.correlate(img, _SOBEL_X, mode="nearest")
    gy = ndimage.correlate(img, _SOBEL_Y, mode="nearest")
    magnitude = np.sqrt(gx * gx + gy * gy)
    direction = np.arctan2(gy, gx)
    return GradientField(gx=gx, gy=gy, magnitude=magnitude, direction=direction)


def _quantize_direction(direction: np.ndarray) -> np.ndarray:
    """Map direction to one of 4 bins: 0=E/W, 1=NE/SW, 2=N/S, 3=NW/SE."""
    return (np.round(direction / (np.pi / 4)).astype(int)) % 4


_BIN_OFFSETS = {
    0: (1, 0),
    1: (1, 1),
    2: (0, 1),
    3: (-1, 1),
}


def suppress(field_: GradientField, abs_threshold: float) -> EdgeCandidates:
    """Absolute plus non-maximum suppression along the quantized direction.

    Keeps pixels whose magnitude exceeds ``abs_threshold`` and is a local
    maximum along the gradient direction (strict on the positive side to
    break plateau ties deterministically). Pixels within BORDER_MARGIN of
    the border are dropped.
    """
    if abs_threshold < 0:
        raise InvalidInputError("abs_threshold must be non-negative")
    mag = field_.magnitude
    h, w = mag.shape
    bins = _quantize_direction(field_.direction)
    keep = mag > abs_threshold
    padded = np.pad(mag, 1, mode="constant")
    for b, (dx, dy) in _BIN_OFFSETS.items():
        sel = bins == b
        fwd = padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        bwd = padded[1 - dy:1 - dy + h, 1 - dx:1 - dx + w]
        keep &= ~sel | ((mag >= fwd) & (mag > bwd))
    keep[:BORDER_MARGIN, :] = False
    keep[-BORDER_MARGIN:, :] = False
    keep[:, :BORDER_MARGIN] = False
    keep[:, -BORDER_MARGIN:] = False
    ys, xs = np.nonzero(keep)
    pixel = np.stack([xs, ys], axis=1)
    return EdgeCandidates(
        pixel=pixel,
        position=pixel.astype(np.float64),
        direction=field_.direction[ys, xs],
        magnitude=mag[ys, xs],
    )


def parabolic_offset(m_minus: np.ndarray, m_center: np.ndarray,
                     m_plus: np.ndarray):
    """Vertex offset of the parabola through (-1, 0, +1) magnitude samples.

    Returns (offset, ok); ``ok`` is False where the parabola is not
    strictly concave, in which case the offset is forced to 0.
    """
    denom = m_minus - 2.0 * m_center + m_plus
    ok = denom < 0
    offset = np.divide(m_minus - m_plus, 2.0 * denom,
                       out=np.zeros_like(denom, dtype=np.float64), where=ok)
    offset = np.clip(offset, -0.5, 0.5)
    return offset, ok


def bilinear_sample(img: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear interpolation at (x, y); coordinates assumed in-bounds."""
    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    x0 = np.clip(x0, 0, img.shape[1] - 2)
    y0 = np.clip(y0, 0, img.shape[0] - 2)
    fx = x - x0
    fy = y - y0
    v00 = img[y0, x0]
    v01 = img[y0, x0 + 1]
    v10 = img[y0 + 1, x0]
    v11 = img[y0 + 1, x0 + 1]
    return (v00 * (1 - fx) * (1 - fy) + v01 * fx * (1 - fy)
            + v10 * (1 - fx) * fy + v11 * fx * fy)


def subpixel_localize(field_: GradientField,
                      candidates: EdgeCandidates) -> EdgeCandidates:
    """Refine candidate positions by a 3-point parabolic fit.

    Magnitudes are sampled bilinearly one pixel to either side along the
    continuous gradient direction; the parabola vertex gives an offset
    bounded to +/-0.5 px. Non-concave fits keep the pixel-center position
    and stay flagged unrefined.
    """
    ux = np.cos(candidates.direction)
    uy = np.sin(candidates.direction)
    x = candidates.pixel[:, 0].astype(np.float64)
    y = candidates.pixel[:, 1].astype(np.float64)
    m_minus = bilinear_sample(field_.magnitude, x - ux, y - uy)
    m_plus = bilinear_sample(field_.magnitude, x + ux, y + uy)
    offset, ok = parabolic_offset(m_minus, candidates.magnitude, m_plus)
    pos = np.stack([x + offset * ux, y + offset * uy], axis=1)
    return EdgeCandidates(pixel=candidates.pixel.copy(), position=pos,
                          direction=candidates.direction.copy(),
                          magnitude=candidates.magnitude.copy(),
                          refined=ok)


def edge_candidates(img: FloatImage,
                    abs_threshold: float = DEFAULT_ABS_THRESHOLD
                    ) -> tuple[EdgeCandidates, GradientField]:
    """Full front-end: smooth, differentiate, suppress, localize."""
    smoothed = gaussian_smooth(img)
    field_ = sobel(smoothed)
    cands = suppress(field_, abs_threshold)
    return subpixel_localize(field_, cands), field_

"""Frame representation, pyramids, gradients, sampling and warping.

All pixel buffers are numpy arrays indexed ``[row, col]``; points are
``(x, y)`` with ``x`` the column coordinate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, NamedTuple

import numpy as np
from scipy.ndimage import correlate1d

from . import _kernels
from .errors import ConfigError, InvalidInputError, InvalidTransformError

if TYPE_CHECKING:
    from .motion import SimilarityTransform

MIN_SIDE = 16
BINOMIAL_5 = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


class Point2(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True, eq=False)
class AuxPlanes:
    """Colour planes carried alongside the luma so composition can warp them.

    ``kind`` is ``"rgb"`` (three full-resolution planes, RGB order, fill 0)
    or ``"yuv"`` (Cb and Cr planes at any subsampling, fill 128).
    """

    kind: str
    planes: tuple[np.ndarray, ...]

    @property
    def fill(self) -> int:
        return 128 if self.kind == "yuv" else 0


@dataclass(frozen=True, eq=False)
class GrayFrame:
    """An immutable 8-bit luma image with its position in the stream."""

    pixels: np.ndarray
    index: int = 0
    aux: AuxPlanes | None = field(default=None)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise InvalidInputError(f"luma buffer must be 2-D, got shape {px.shape}")
        if px.dtype != np.uint8:
            raise InvalidInputError(f"luma buffer must be uint8, got {px.dtype}")
        if px.shape[0] < MIN_SIDE or px.shape[1] < MIN_SIDE:
            raise InvalidInputError(
                f"frame {px.shape[1]}x{px.shape[0]} is smaller than {MIN_SIDE}x{MIN_SIDE}"
            )
        if self.index < 0:
            raise InvalidInputError("frame index must be non-negative")
        px = np.ascontiguousarray(px)
        if px.flags.writeable:
            px = px.copy()
            px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def with_pixels(self, pixels: np.ndarray, aux: AuxPlanes | None = None) -> GrayFrame:
        return GrayFrame(pixels, self.index, aux)

    def same_as(self, other: GrayFrame) -> bool:
        """Bit-exact comparison of luma (and colour planes when present)."""
        if self.index != other.index or not np.array_equal(self.pixels, other.pixels):
            return False
        if (self.aux is None) != (other.aux is None):
            return False
        if self.aux is None:
            return True
        return self.aux.kind == other.aux.kind and all(
            np.array_equal(a, b) for a, b in zip(self.aux.planes, other.aux.planes)
        )


@dataclass(frozen=True, eq=False)
class Pyramid:
    """Float image pyramid, level 0 at full resolution, with cached gradients."""

    levels: tuple[np.ndarray, ...]
    grads: tuple[tuple[np.ndarray, np.ndarray], ...]

    @property
    def level_count(self) -> int:
        return len(self.levels)

    @property
    def shape(self) -> tuple[int, int]:
        return self.levels[0].shape


def _as_float(frame_or_array) -> np.ndarray:
    arr = frame_or_array.pixels if isinstance(frame_or_array, GrayFrame) else frame_or_array
    return np.asarray(arr, dtype=np.float64)


def pyramid_depth(width: int, height: int, max_levels: int) -> int:
    levels = 1
    while levels < max_levels and width // 2 >= MIN_SIDE and height // 2 >= MIN_SIDE:
        width //= 2
        height //= 2
        levels += 1
    return levels


def downsample(img: np.ndarray) -> np.ndarray:
    """Binomial low-pass along both axes, then keep every other sample."""
    blurred = correlate1d(img, BINOMIAL_5, axis=0, mode="reflect")
    blurred = correlate1d(blurred, BINOMIAL_5, axis=1, mode="reflect")
    h, w = img.shape
    return np.ascontiguousarray(blurred[: 2 * (h // 2) : 2, : 2 * (w // 2) : 2])


def build_pyramid(frame: GrayFrame, max_levels: int) -> Pyramid:
    if max_levels < 1:
        raise InvalidInputError("max_levels must be >= 1")
    if frame.width < MIN_SIDE or frame.height < MIN_SIDE:
        raise InvalidInputError("frame smaller than 16x16")
    depth = pyramid_depth(frame.width, frame.height, max_levels)
    levels = [_as_float(frame)]
    for _ in range(depth - 1):
        levels.append(downsample(levels[-1]))
    return Pyramid(tuple(levels), tuple(gradients(lv) for lv in levels))


def gradients(frame) -> tuple[np.ndarray, np.ndarray]:
    """Central differences ``(I[+1] - I[-1]) / 2`` with replicated borders."""
    img = _as_float(frame)
    padded = np.pad(img, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    return gx, gy


def sample_bilinear(frame, p) -> float:
    """Bilinear intensity at sub-pixel ``p``; 0 outside the pixel grid."""
    x, y = float(p[0]), float(p[1])
    return float(_kernels.bilinear_zero(_as_float(frame), x, y))


def _inverse_coeffs(t: SimilarityTransform) -> tuple[float, float]:
    s, theta = float(t.s), float(t.theta)
    if not (math.isfinite(s) and math.isfinite(theta) and math.isfinite(t.tx) and math.isfinite(t.ty)):
        raise InvalidTransformError("transform has non-finite parameters")
    if s <= 0.0:
        raise InvalidTransformError(f"scale must be positive, got {s}")
    return math.cos(theta) / s, math.sin(theta) / s


def warp_plane(
    plane: np.ndarray,
    t: SimilarityTransform,
    fill: int = 0,
    coord_scale: float = 1.0,
    out_shape: tuple[int, int] | None = None,
) -> np.ndarray:
    """Inverse-map warp of a single uint8 plane.

    ``coord_scale`` rescales the translation for subsampled planes (0.5 for
    4:2:0 chroma); rotation and scale are resolution independent.
    """
    a, b = _inverse_coeffs(t)
    src = np.asarray(plane, dtype=np.float64)
    h, w = out_shape if out_shape is not None else src.shape
    return _kernels.warp_inverse(src, a, b, t.tx * coord_scale, t.ty * coord_scale, h, w, fill)


def warp_similarity(frame: GrayFrame, t: SimilarityTransform) -> GrayFrame:
    out = warp_plane(frame.pixels, t)
    aux = None
    if frame.aux is not None:
        aux = AuxPlanes(
            frame.aux.kind,
            tuple(
                warp_plane(p, t, frame.aux.fill, p.shape[1] / frame.width)
                for p in frame.aux.planes
            ),
        )
    return frame.with_pixels(out, aux)


def resize_plane(plane: np.ndarray, crop_ratio: float) -> np.ndarray:
    src = np.asarray(plane, dtype=np.float64)
    h, w = src.shape
    cx, cy = crop_ratio * w, crop_ratio * h
    step_x = (w - 1 - 2 * cx) / (w - 1)
    step_y = (h - 1 - 2 * cy) / (h - 1)
    return _kernels.resize_region(src, cx, cy, step_x, step_y, h, w)


def crop_resize(frame: GrayFrame, crop_ratio: float) -> GrayFrame:
    """Cut ``crop_ratio`` of each dimension from every side and scale back up."""
    if not (0.0 <= crop_ratio < 0.25):
        raise ConfigError(f"crop_ratio must be in [0, 0.25), got {crop_ratio}")
    if crop_ratio == 0.0:
        return frame
    aux = None
    if frame.aux is not None:
        aux = AuxPlanes(frame.aux.kind, tuple(resize_plane(p, crop_ratio) for p in frame.aux.planes))
    return frame.with_pixels(resize_plane(frame.pixels, crop_ratio), aux)

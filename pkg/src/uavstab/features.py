"""Shi-Tomasi corners restricted to a central region of interest."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .image_core import GrayFrame, Point2, gradients


@dataclass(frozen=True)
class DetectConfig:
    max_corners: int = 50
    quality_level: float = 0.01
    min_distance: float = 10.0
    block_size: int = 3
    roi_margin: float = 0.1

    def __post_init__(self):
        if self.max_corners < 8:
            raise ConfigError("max_corners must be >= 8")
        if not 0.0 < self.quality_level < 1.0:
            raise ConfigError("quality_level must be in (0, 1)")
        if self.min_distance < 1:
            raise ConfigError("min_distance must be >= 1")
        if self.block_size < 3 or self.block_size % 2 == 0:
            raise ConfigError("block_size must be odd and >= 3")
        if not 0.0 <= self.roi_margin < 0.4:
            raise ConfigError("roi_margin must be in [0, 0.4)")


@dataclass(frozen=True)
class Corner:
    position: Point2
    score: float


def roi_bounds(width: int, height: int, margin: float) -> tuple[int, int, int, int]:
    """Half-open pixel rectangle ``(x0, y0, x1, y1)`` left after trimming ``margin``."""
    mx = math.ceil(margin * width)
    my = math.ceil(margin * height)
    return mx, my, width - mx, height - my


def box_sum(img: np.ndarray, block_size: int) -> np.ndarray:
    """Uniform-weight window sum with replicated borders."""
    half = block_size // 2
    padded = np.pad(img, half, mode="edge")
    h, w = img.shape
    out = np.zeros_like(img)
    for dy in range(block_size):
        for dx in range(block_size):
            out += padded[dy : dy + h, dx : dx + w]
    return out


def _structure_sums(gx: np.ndarray, gy: np.ndarray, block_size: int):
    return box_sum(gx * gx, block_size), box_sum(gx * gy, block_size), box_sum(gy * gy, block_size)


def min_eigenvalue(sxx, sxy, syy):
    half_tr = 0.5 * (sxx + syy)
    half_diff = 0.5 * (sxx - syy)
    lam = half_tr - np.sqrt(half_diff * half_diff + sxy * sxy)
    return np.maximum(lam, 0.0)


def min_eig_response(frame: GrayFrame | np.ndarray, block_size: int = 3) -> np.ndarray:
    """Smaller eigenvalue of the box-summed structure tensor at every pixel."""
    gx, gy = gradients(frame)
    return min_eigenvalue(*_structure_sums(gx, gy, block_size))


def roi_response(frame: GrayFrame, cfg: DetectConfig) -> tuple[np.ndarray, tuple[int, int, int, int]]:
    """Response over the ROI only, identical to cropping the full-frame map.

    A halo wide enough for the gradient and box window is cut around the ROI
    and edge-replicated where it meets the frame border, so values match.
    """
    x0, y0, x1, y1 = roi_bounds(frame.width, frame.height, cfg.roi_margin)
    if x1 - x0 < 32 or y1 - y0 < 32:
        raise ConfigError(f"detection ROI {x1 - x0}x{y1 - y0} is smaller than 32x32")
    halo = cfg.block_size // 2 + 2
    hx0, hy0 = max(0, x0 - halo), max(0, y0 - halo)
    hx1, hy1 = min(frame.width, x1 + halo), min(frame.height, y1 + halo)
    sub = frame.pixels[hy0:hy1, hx0:hx1]
    resp = min_eig_response(sub, cfg.block_size)
    return resp[y0 - hy0 : y1 - hy0, x0 - hx0 : x1 - hx0], (x0, y0, x1, y1)


def select_greedy(response: np.ndarray, threshold: float, max_corners: int, min_distance: float):
    """Score-ordered selection rejecting candidates closer than ``min_distance``.

    Returns ``(rows, cols)`` into ``response``. Ties keep row-major order.
    """
    flat = response.ravel()
    cand = np.flatnonzero((flat >= threshold) & (flat > 0.0))
    if cand.size == 0:
        return np.empty(0, int), np.empty(0, int)
    order = cand[np.argsort(-flat[cand], kind="stable")]
    h, w = response.shape
    blocked = np.zeros((h, w), dtype=bool)
    rad = int(math.ceil(min_distance))
    dy, dx = np.mgrid[-rad : rad + 1, -rad : rad + 1]
    disk = dx * dx + dy * dy < min_distance * min_distance
    rows, cols = [], []
    for idx in order:
        r, c = divmod(int(idx), w)
        if blocked[r, c]:
            continue
        rows.append(r)
        cols.append(c)
        if len(rows) == max_corners:
            break
        r0, r1 = max(0, r - rad), min(h, r + rad + 1)
        c0, c1 = max(0, c - rad), min(w, c + rad + 1)
        blocked[r0:r1, c0:c1] |= disk[r0 - r + rad : r1 - r + rad, c0 - c + rad : c1 - c + rad]
    return np.array(rows, dtype=int), np.array(cols, dtype=int)


def detect_corner_array(frame: GrayFrame, cfg: DetectConfig) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised form of :func:`detect_corners`: ``(points[N, 2], scores[N])``."""
    resp, (x0, y0, _, _) = roi_response(frame, cfg)
    peak = float(resp.max()) if resp.size else 0.0
    if peak <= 0.0:
        return np.empty((0, 2)), np.empty(0)
    rows, cols = select_greedy(resp, cfg.quality_level * peak, cfg.max_corners, cfg.min_distance)
    pts = np.column_stack([cols + x0, rows + y0]).astype(np.float64)
    return pts, resp[rows, cols]


def detect_corners(frame: GrayFrame, cfg: DetectConfig = DetectConfig()) -> list[Corner]:
    pts, scores = detect_corner_array(frame, cfg)
    return [Corner(Point2(float(x), float(y)), float(s)) for (x, y), s in zip(pts, scores)]

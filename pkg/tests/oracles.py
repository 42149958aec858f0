"""Slow, independent reference implementations used to check the library.

Nothing here imports uavstab internals; every routine is written as the most
literal loop over the definition so that agreement means something.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize_scalar


def clamp(v: int, lo: int, hi: int) -> int:
    return lo if v < lo else hi if v > hi else v


def gradients_loop(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    gx = np.zeros((h, w))
    gy = np.zeros((h, w))
    for r in range(h):
        for c in range(w):
            gx[r, c] = (img[r, clamp(c + 1, 0, w - 1)] - img[r, clamp(c - 1, 0, w - 1)]) / 2.0
            gy[r, c] = (img[clamp(r + 1, 0, h - 1), c] - img[clamp(r - 1, 0, h - 1), c]) / 2.0
    return gx, gy


def min_eig_loop(img: np.ndarray, block: int = 3) -> np.ndarray:
    """Per-pixel 2x2 structure tensor, smaller eigenvalue via ``eigvalsh``."""
    gx, gy = gradients_loop(img)
    h, w = gx.shape
    half = block // 2
    out = np.zeros((h, w))
    for r in range(h):
        for c in range(w):
            a = b = d = 0.0
            for dr in range(-half, half + 1):
                for dc in range(-half, half + 1):
                    rr, cc = clamp(r + dr, 0, h - 1), clamp(c + dc, 0, w - 1)
                    a += gx[rr, cc] ** 2
                    b += gx[rr, cc] * gy[rr, cc]
                    d += gy[rr, cc] ** 2
            out[r, c] = max(0.0, float(np.linalg.eigvalsh(np.array([[a, b], [b, d]]))[0]))
    return out


def greedy_loop(resp: np.ndarray, threshold: float, max_corners: int, min_distance: float):
    """Candidates sorted by (-score, row, col); accept if far from all accepted."""
    h, w = resp.shape
    cands = [
        (-resp[r, c], r, c) for r in range(h) for c in range(w) if resp[r, c] >= threshold and resp[r, c] > 0
    ]
    cands.sort()
    chosen: list[tuple[int, int]] = []
    for _, r, c in cands:
        if all(math.hypot(r - r2, c - c2) >= min_distance for r2, c2 in chosen):
            chosen.append((r, c))
            if len(chosen) == max_corners:
                break
    return chosen


def reflect_index(i: int, n: int) -> int:
    """Half-sample symmetric extension: ``d c b a | a b c d | d c b a``."""
    while i < 0 or i >= n:
        i = -i - 1 if i < 0 else 2 * n - i - 1
    return i


def downsample_loop(img: np.ndarray) -> np.ndarray:
    k = [1 / 16, 4 / 16, 6 / 16, 4 / 16, 1 / 16]
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    out = np.zeros((h // 2, w // 2))
    for r in range(h // 2):
        for c in range(w // 2):
            acc = 0.0
            for i in range(5):
                for j in range(5):
                    acc += k[i] * k[j] * img[reflect_index(2 * r + i - 2, h), reflect_index(2 * c + j - 2, w)]
            out[r, c] = acc
    return out


def bilinear(img: np.ndarray, x: float, y: float) -> float:
    h, w = img.shape
    if not (0 <= x <= w - 1 and 0 <= y <= h - 1):
        return 0.0
    x0, y0 = int(math.floor(x)), int(math.floor(y))
    x1, y1 = min(x0 + 1, w - 1), min(y0 + 1, h - 1)
    fx, fy = x - x0, y - y0
    top = (1 - fx) * img[y0, x0] + fx * img[y0, x1]
    bot = (1 - fx) * img[y1, x0] + fx * img[y1, x1]
    return float((1 - fy) * top + fy * bot)


def similarity_lstsq(src: np.ndarray, dst: np.ndarray) -> tuple[float, float, float, float]:
    """Linear least squares in ``(a, b, tx, ty)``; returns ``(tx, ty, theta, s)``."""
    n = len(src)
    A = np.zeros((2 * n, 4))
    A[0::2] = np.column_stack([src[:, 0], -src[:, 1], np.ones(n), np.zeros(n)])
    A[1::2] = np.column_stack([src[:, 1], src[:, 0], np.zeros(n), np.ones(n)])
    rhs = dst.reshape(-1)
    (a, b, tx, ty), *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return float(tx), float(ty), math.atan2(b, a), math.hypot(a, b)


def rigid_objective(theta: float, src: np.ndarray, dst: np.ndarray) -> float:
    c, s = math.cos(theta), math.sin(theta)
    R = np.array([[c, -s], [s, c]])
    t = dst.mean(axis=0) - R @ src.mean(axis=0)
    err = dst - (src @ R.T + t)
    return float(np.sum(err**2))


def rigid_search(src: np.ndarray, dst: np.ndarray) -> tuple[float, float, float]:
    """Grid over theta, then bounded 1-D refinement; returns ``(tx, ty, theta)``."""
    grid = np.linspace(-math.pi, math.pi, 721)
    best = grid[int(np.argmin([rigid_objective(t, src, dst) for t in grid]))]
    step = grid[1] - grid[0]
    res = minimize_scalar(
        rigid_objective, bounds=(best - step, best + step), args=(src, dst),
        method="bounded", options={"xatol": 1e-12},
    )
    th = float(res.x)
    c, s = math.cos(th), math.sin(th)
    t = dst.mean(axis=0) - np.array([[c, -s], [s, c]]) @ src.mean(axis=0)
    return float(t[0]), float(t[1]), th


def rms_loop(src, dst, tx, ty, theta, s) -> float:
    total = 0.0
    for (x, y), (u, v) in zip(src, dst):
        px = s * (math.cos(theta) * x - math.sin(theta) * y) + tx
        py = s * (math.sin(theta) * x + math.cos(theta) * y) + ty
        total += (u - px) ** 2 + (v - py) ** 2
    return math.sqrt(total / len(src))


def prefix_sums(rows: list[list[float]]) -> list[list[float]]:
    out = []
    acc = [0.0] * len(rows[0])
    for r in rows:
        acc = [a + b for a, b in zip(acc, r)]
        out.append(list(acc))
    return out


def window_mean(cum: np.ndarray, i: int, r: int) -> np.ndarray:
    lo, hi = max(0, i - r), min(len(cum) - 1, i + r)
    acc = np.zeros(cum.shape[1])
    for j in range(lo, hi + 1):
        acc = acc + cum[j]
    return acc / (hi - lo + 1)


def dense_shift(a: np.ndarray, b: np.ndarray, search: int, border: int) -> tuple[int, int]:
    """Integer ``(dx, dy)`` minimising SSD so that ``b[y + dy, x + dx] ~ a[y, x]``."""
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    h, w = a.shape
    core = a[border : h - border, border : w - border]
    best, arg = math.inf, (0, 0)
    for dy in range(-search, search + 1):
        for dx in range(-search, search + 1):
            win = b[border + dy : h - border + dy, border + dx : w - border + dx]
            ssd = float(np.sum((win - core) ** 2))
            if ssd < best:
                best, arg = ssd, (dx, dy)
    return arg


def centroid(img: np.ndarray) -> tuple[float, float]:
    img = np.asarray(img, dtype=np.float64)
    yy, xx = np.mgrid[0 : img.shape[0], 0 : img.shape[1]]
    m = img.sum()
    return float((xx * img).sum() / m), float((yy * img).sum() / m)


def psnr_loop(a: np.ndarray, b: np.ndarray) -> float:
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    mse = sum(float(v) for v in ((a - b) ** 2).ravel()) / a.size
    return math.inf if mse == 0 else 10 * math.log10(255.0**2 / mse)


def shifted_crop(img: np.ndarray, dx: int, dy: int, width: int, height: int, pad: int = 32) -> np.ndarray:
    """Crop of ``img`` whose content appears moved by ``(dx, dy)`` relative to ``dx = dy = 0``."""
    return np.ascontiguousarray(img[pad - dy : pad - dy + height, pad - dx : pad - dx + width])

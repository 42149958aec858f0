"""Compiled inner loops: bilinear sampling, warping and per-point Lucas-Kanade.

Everything here is plain ``njit`` without fastmath so results are bit-for-bit
reproducible between runs and between threads.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def bilinear_zero(img, x, y):
    h, w = img.shape
    if not (0.0 <= x <= w - 1.0 and 0.0 <= y <= h - 1.0):
        return 0.0
    x0 = int(math.floor(x))
    y0 = int(math.floor(y))
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


@njit(cache=True)
def bilinear_clamped(img, x, y):
    h, w = img.shape
    if x < 0.0:
        x = 0.0
    elif x > w - 1.0:
        x = w - 1.0
    if y < 0.0:
        y = 0.0
    elif y > h - 1.0:
        y = h - 1.0
    x0 = int(math.floor(x))
    y0 = int(math.floor(y))
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fx = x - x0
    fy = y - y0
    top = img[y0, x0] * (1.0 - fx) + img[y0, x1] * fx
    bot = img[y1, x0] * (1.0 - fx) + img[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


@njit(cache=True)
def _to_u8(v):
    v = math.floor(v + 0.5)
    if v < 0.0:
        return 0
    if v > 255.0:
        return 255
    return int(v)


@njit(cache=True)
def warp_inverse(src, a, b, tx, ty, out_h, out_w, fill):
    """out[r, c] = src(a*(c-tx) + b*(r-ty), -b*(c-tx) + a*(r-ty)), else fill."""
    out = np.empty((out_h, out_w), np.uint8)
    h, w = src.shape
    for r in range(out_h):
        dy = r - ty
        for c in range(out_w):
            dx = c - tx
            x = a * dx + b * dy
            y = -b * dx + a * dy
            if 0.0 <= x <= w - 1.0 and 0.0 <= y <= h - 1.0:
                out[r, c] = _to_u8(bilinear_zero(src, x, y))
            else:
                out[r, c] = fill
    return out


@njit(cache=True)
def resize_region(src, x0, y0, step_x, step_y, out_h, out_w):
    """Resample src on the grid (x0 + c*step_x, y0 + r*step_y) with clamping."""
    out = np.empty((out_h, out_w), np.uint8)
    for r in range(out_h):
        y = y0 + r * step_y
        for c in range(out_w):
            out[r, c] = _to_u8(bilinear_clamped(src, x0 + c * step_x, y))
    return out


@njit(cache=True)
def _split(v):
    base = math.floor(v)
    return int(base), v - base


@njit(cache=True)
def lk_level(I, Ix, Iy, J, pts, guess, radius, max_iter, eps, min_eig, is_final):
    """Refine the flow of every point at one pyramid level.

    ``pts`` are point positions scaled to this level and ``guess`` the flow
    propagated from the coarser level. Returns the refined flow, the
    per-point success flag and the minimum eigenvalue of each normal matrix.

    Window pixels falling outside either image are left out of the normal
    equations, so points near the border are not biased by padding.
    Unconditioned points keep their guess; they only fail on the final level.
    """
    n = pts.shape[0]
    side = 2 * radius + 1
    k = side * side
    flow = guess.copy()
    ok = np.ones(n, np.bool_)
    eigs = np.zeros(n)
    patch = np.empty(k)
    gx = np.empty(k)
    gy = np.empty(k)
    inside = np.empty(k, np.bool_)
    h, w = I.shape
    xmax = w - 1.0
    ymax = h - 1.0
    for p in range(n):
        px = pts[p, 0]
        py = pts[p, 1]
        if not (math.isfinite(px) and math.isfinite(py)):
            ok[p] = False
            continue
        # every window sample shares the fractional offset, hence the weights
        bx, fx = _split(px)
        by, fy = _split(py)
        w00 = (1.0 - fx) * (1.0 - fy)
        w01 = fx * (1.0 - fy)
        w10 = (1.0 - fx) * fy
        w11 = fx * fy
        gxx = 0.0
        gxy = 0.0
        gyy = 0.0
        m = 0
        for j in range(-radius, radius + 1):
            r0 = by + j
            row_in = r0 >= 0 and (r0 < h - 1 or (r0 == h - 1 and fy == 0.0))
            r1 = min(r0 + 1, h - 1)
            for i in range(-radius, radius + 1):
                c0 = bx + i
                if row_in and c0 >= 0 and (c0 < w - 1 or (c0 == w - 1 and fx == 0.0)):
                    c1 = min(c0 + 1, w - 1)
                    inside[m] = True
                    patch[m] = w00 * I[r0, c0] + w01 * I[r0, c1] + w10 * I[r1, c0] + w11 * I[r1, c1]
                    vx = w00 * Ix[r0, c0] + w01 * Ix[r0, c1] + w10 * Ix[r1, c0] + w11 * Ix[r1, c1]
                    vy = w00 * Iy[r0, c0] + w01 * Iy[r0, c1] + w10 * Iy[r1, c0] + w11 * Iy[r1, c1]
                    gx[m] = vx
                    gy[m] = vy
                    gxx += vx * vx
                    gxy += vx * vy
                    gyy += vy * vy
                else:
                    inside[m] = False
                m += 1
        half_diff = 0.5 * (gxx - gyy)
        lam = 0.5 * (gxx + gyy) - math.sqrt(half_diff * half_diff + gxy * gxy)
        eigs[p] = lam
        if lam < min_eig:
            if is_final:
                ok[p] = False
            continue
        ux = flow[p, 0]
        uy = flow[p, 1]
        for _ in range(max_iter):
            qx = px + ux
            qy = py + uy
            if not (math.isfinite(qx) and math.isfinite(qy)):
                ok[p] = False
                break
            jbx, jfx = _split(qx)
            jby, jfy = _split(qy)
            v00 = (1.0 - jfx) * (1.0 - jfy)
            v01 = jfx * (1.0 - jfy)
            v10 = (1.0 - jfx) * jfy
            v11 = jfx * jfy
            bxs = 0.0
            bys = 0.0
            axx = 0.0
            axy = 0.0
            ayy = 0.0
            m = 0
            for j in range(-radius, radius + 1):
                r0 = jby + j
                row_in = r0 >= 0 and (r0 < h - 1 or (r0 == h - 1 and jfy == 0.0))
                r1 = min(r0 + 1, h - 1)
                for i in range(-radius, radius + 1):
                    if inside[m] and row_in:
                        c0 = jbx + i
                        if c0 >= 0 and (c0 < w - 1 or (c0 == w - 1 and jfx == 0.0)):
                            c1 = min(c0 + 1, w - 1)
                            vx = gx[m]
                            vy = gy[m]
                            diff_i = patch[m] - (
                                v00 * J[r0, c0] + v01 * J[r0, c1] + v10 * J[r1, c0] + v11 * J[r1, c1]
                            )
                            bxs += diff_i * vx
                            bys += diff_i * vy
                            axx += vx * vx
                            axy += vx * vy
                            ayy += vy * vy
                    m += 1
            det = axx * ayy - axy * axy
            if not det > 0.0:
                ok[p] = False
                break
            ex = (ayy * bxs - axy * bys) / det
            ey = (axx * bys - axy * bxs) / det
            ux += ex
            uy += ey
            if ex * ex + ey * ey < eps * eps:
                break
        flow[p, 0] = ux
        flow[p, 1] = uy
        if not (math.isfinite(ux) and math.isfinite(uy)):
            ok[p] = False
        elif is_final and not (0.0 <= px + ux <= xmax and 0.0 <= py + uy <= ymax):
            ok[p] = False
    return flow, ok, eigs


def warmup() -> None:
    """Load or compile every kernel once so stage timings exclude JIT cost."""
    img = np.zeros((16, 16))
    pts = np.full((1, 2), 8.0)
    bilinear_zero(img, 1.5, 1.5)
    bilinear_clamped(img, 1.5, 1.5)
    warp_inverse(img, 1.0, 0.0, 0.0, 0.0, 16, 16, 0)
    resize_region(img, 1.0, 1.0, 0.9, 0.9, 16, 16)
    lk_level(img, img, img, img, pts, np.zeros((1, 2)), 2, 2, 0.01, 1e-4, True)

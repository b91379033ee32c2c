"""Compiled inner loops: span extraction, scoring, and blending.

Candidate evaluation runs millions of times per fitted image, so the
per-shape work (rasterize, solve color, score) lives here as numba
kernels. Geometry is described by a small float parameter vector; integer
shape parameters stay exact in float64 at canvas magnitudes, which is what
makes span output match the per-pixel oracle bit for bit.

Coverage rule everywhere: a pixel (x, y) is covered iff its center
(x + 0.5, y + 0.5) lies inside or on the boundary of the continuous shape.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

# Geometric classes used by the kernels. Circles are rasterized as ellipses
# with rx == ry; the public six-kind enumeration lives in geometry.py.
GEOM_TRIANGLE = 0
GEOM_BOX = 1
GEOM_ROT_RECT = 2
GEOM_ELLIPSE = 3
GEOM_ROT_ELLIPSE = 4

# Parameter vector layout (length 8, unused slots zero):
#   triangle:     x1 y1 x2 y2 x3 y3
#   box:          x_lo y_lo x_hi y_hi          (continuous, boundary inclusive)
#   rot-rect:     cx cy w h cos sin
#   ellipse:      cx cy rx ry
#   rot-ellipse:  cx cy rx ry cos sin


@njit(cache=True, nogil=True)
def covered(geom: int, p: np.ndarray, xc: float, yc: float) -> bool:
    """Exact center-inside-or-on-boundary test for one pixel center."""
    if geom == GEOM_TRIANGLE:
        ax, ay, bx, by, cx, cy = p[0], p[1], p[2], p[3], p[4], p[5]
        e1 = (bx - ax) * (yc - ay) - (by - ay) * (xc - ax)
        e2 = (cx - bx) * (yc - by) - (cy - by) * (xc - bx)
        e3 = (ax - cx) * (yc - cy) - (ay - cy) * (xc - cx)
        orient = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if orient > 0.0:
            return e1 >= 0.0 and e2 >= 0.0 and e3 >= 0.0
        if orient < 0.0:
            return e1 <= 0.0 and e2 <= 0.0 and e3 <= 0.0
        # Collinear vertices: hull is a segment (or point).
        if e1 != 0.0 or e2 != 0.0 or e3 != 0.0:
            return False
        xmin = min(ax, min(bx, cx))
        xmax = max(ax, max(bx, cx))
        ymin = min(ay, min(by, cy))
        ymax = max(ay, max(by, cy))
        return xmin <= xc <= xmax and ymin <= yc <= ymax
    elif geom == GEOM_BOX:
        return p[0] <= xc <= p[2] and p[1] <= yc <= p[3]
    elif geom == GEOM_ROT_RECT:
        dx = xc - p[0]
        dy = yc - p[1]
        u = dx * p[4] + dy * p[5]
        v = -dx * p[5] + dy * p[4]
        return abs(u) * 2.0 <= p[2] and abs(v) * 2.0 <= p[3]
    elif geom == GEOM_ELLIPSE:
        dx = xc - p[0]
        dy = yc - p[1]
        rx2 = p[2] * p[2]
        ry2 = p[3] * p[3]
        return dx * dx * ry2 + dy * dy * rx2 <= rx2 * ry2
    else:
        dx = xc - p[0]
        dy = yc - p[1]
        u = dx * p[4] + dy * p[5]
        v = -dx * p[5] + dy * p[4]
        rx2 = p[2] * p[2]
        ry2 = p[3] * p[3]
        return u * u * ry2 + v * v * rx2 <= rx2 * ry2


@njit(cache=True, nogil=True)
def _row_interval(geom: int, p: np.ndarray, yc: float) -> tuple[bool, float, float]:
    """Conservative x-center interval for one scanline.

    Returns (candidate, lo, hi). May overshoot by up to a pixel on either
    side (float roots, widened tangent rows); raster_spans contracts the
    result with the exact predicate, so only *misses* would be errors and
    the interval is built to never miss by more than the +-1 widening.
    """
    if geom == GEOM_TRIANGLE:
        ax, ay, bx, by, cx, cy = p[0], p[1], p[2], p[3], p[4], p[5]
        orient = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if orient == 0.0:
            # Degenerate: scan the whole bbox row; contraction does the work.
            return True, min(ax, min(bx, cx)), max(ax, max(bx, cx))
        lo = -1.0e30
        hi = 1.0e30
        for e in range(3):
            if e == 0:
                ex, ey, fx, fy = ax, ay, bx, by
            elif e == 1:
                ex, ey, fx, fy = bx, by, cx, cy
            else:
                ex, ey, fx, fy = cx, cy, ax, ay
            a = -(fy - ey)
            b = (fx - ex) * (yc - ey) + (fy - ey) * ex
            if orient < 0.0:
                a = -a
                b = -b
            if a == 0.0:
                if b < 0.0:
                    return False, 0.0, 0.0
            elif a > 0.0:
                t = -b / a
                if t > lo:
                    lo = t
            else:
                t = -b / a
                if t < hi:
                    hi = t
        return hi >= lo - 1.0, lo, hi
    elif geom == GEOM_BOX:
        if yc < p[1] or yc > p[3]:
            return False, 0.0, 0.0
        return True, p[0], p[2]
    elif geom == GEOM_ROT_RECT:
        cx, cy, w, h, c, s = p[0], p[1], p[2], p[3], p[4], p[5]
        dy = yc - cy
        lo = -1.0e30
        hi = 1.0e30
        for k in range(2):
            if k == 0:
                a = c
                off = s * dy
                lim = w * 0.5
            else:
                a = -s
                off = c * dy
                lim = h * 0.5
            if a == 0.0:
                if abs(off) > lim:
                    return False, 0.0, 0.0
            else:
                t1 = (lim - off) / a
                t2 = (-lim - off) / a
                if t1 < t2:
                    t1, t2 = t2, t1
                if t2 > lo:
                    lo = t2
                if t1 < hi:
                    hi = t1
        return hi >= lo - 1.0, cx + lo, cx + hi
    elif geom == GEOM_ELLIPSE:
        cx, cy, rx, ry = p[0], p[1], p[2], p[3]
        dy = yc - cy
        rem = ry * ry - dy * dy
        if rem < 0.0:
            if dy * dy > (ry + 1.0) * (ry + 1.0):
                return False, 0.0, 0.0
            rem = 0.0
        hw = rx * math.sqrt(rem) / ry
        return True, cx - hw, cx + hw
    else:
        cx, cy, rx, ry, c, s = p[0], p[1], p[2], p[3], p[4], p[5]
        dy = yc - cy
        rx2 = rx * rx
        ry2 = ry * ry
        sdy = s * dy
        cdy = c * dy
        qa = ry2 * c * c + rx2 * s * s
        qb = 2.0 * (ry2 * c * sdy - rx2 * s * cdy)
        qc = ry2 * sdy * sdy + rx2 * cdy * cdy - rx2 * ry2
        disc = qb * qb - 4.0 * qa * qc
        if disc < 0.0:
            # Tangent rows sit at disc ~ 0; keep a point interval for them.
            if disc < -4.0 * qa:
                return False, 0.0, 0.0
            disc = 0.0
        sq = math.sqrt(disc)
        return True, cx + (-qb - sq) / (2.0 * qa), cx + (-qb + sq) / (2.0 * qa)


@njit(cache=True, nogil=True)
def _y_range(geom: int, p: np.ndarray, H: int) -> tuple[int, int]:
    """Conservative row range (clamped, widened by one row each side)."""
    if geom == GEOM_TRIANGLE:
        ylo = min(p[1], min(p[3], p[5]))
        yhi = max(p[1], max(p[3], p[5]))
    elif geom == GEOM_BOX:
        ylo = p[1]
        yhi = p[3]
    elif geom == GEOM_ROT_RECT:
        hy = (abs(p[5]) * p[2] + abs(p[4]) * p[3]) * 0.5
        ylo = p[1] - hy
        yhi = p[1] + hy
    elif geom == GEOM_ELLIPSE:
        ylo = p[1] - p[3]
        yhi = p[1] + p[3]
    else:
        hy = math.sqrt(p[2] * p[2] * p[5] * p[5] + p[3] * p[3] * p[4] * p[4])
        ylo = p[1] - hy
        yhi = p[1] + hy
    y0 = int(math.ceil(ylo - 0.5)) - 1
    y1 = int(math.floor(yhi - 0.5)) + 1
    if y0 < 0:
        y0 = 0
    if y1 > H - 1:
        y1 = H - 1
    return y0, y1


@njit(cache=True, nogil=True)
def raster_spans(
    geom: int, p: np.ndarray, W: int, H: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact pixel coverage of a shape as per-row spans, clipped to W x H."""
    y0, y1 = _y_range(geom, p, H)
    nrows = y1 - y0 + 1
    if nrows < 1:
        nrows = 0
    ys = np.empty(nrows, np.int32)
    xas = np.empty(nrows, np.int32)
    xbs = np.empty(nrows, np.int32)
    m = 0
    for y in range(y0, y1 + 1):
        yc = y + 0.5
        cand, lo, hi = _row_interval(geom, p, yc)
        if not cand:
            continue
        xlo = int(math.ceil(lo - 0.5)) - 1
        xhi = int(math.floor(hi - 0.5)) + 1
        if xlo < 0:
            xlo = 0
        if xhi > W - 1:
            xhi = W - 1
        # Contract to the exact predicate (expansion first covers the case
        # of an interval that undershoots by float rounding).
        while xlo > 0 and covered(geom, p, xlo - 0.5, yc):
            xlo -= 1
        while xlo <= xhi and not covered(geom, p, xlo + 0.5, yc):
            xlo += 1
        while xhi < W - 1 and covered(geom, p, xhi + 1.5, yc):
            xhi += 1
        while xhi >= xlo and not covered(geom, p, xhi + 0.5, yc):
            xhi -= 1
        if xlo > xhi:
            continue
        ys[m] = y
        xas[m] = xlo
        xbs[m] = xhi
        m += 1
    return ys[:m], xas[:m], xbs[:m]


@njit(cache=True, nogil=True)
def solve_color(
    ys: np.ndarray,
    xa: np.ndarray,
    xb: np.ndarray,
    target: np.ndarray,
    canvas: np.ndarray,
    alpha: int,
) -> tuple[int, int, int]:
    """Least-squares channel values minimizing post-blend SSE over the spans.

    Per channel: clamp(round_half_up(sum(t*255 - cur*(255-alpha))
    / (alpha * n)), 0, 255). Exact integer arithmetic throughout.
    """
    n = 0
    s0 = 0
    s1 = 0
    s2 = 0
    inv = 255 - alpha
    for i in range(ys.shape[0]):
        y = ys[i]
        for x in range(xa[i], xb[i] + 1):
            n += 1
            s0 += int(target[y, x, 0]) * 255 - int(canvas[y, x, 0]) * inv
            s1 += int(target[y, x, 1]) * 255 - int(canvas[y, x, 1]) * inv
            s2 += int(target[y, x, 2]) * 255 - int(canvas[y, x, 2]) * inv
    if n == 0:
        return 0, 0, 0
    d = alpha * n
    c0 = (2 * s0 + d) // (2 * d)
    c1 = (2 * s1 + d) // (2 * d)
    c2 = (2 * s2 + d) // (2 * d)
    c0 = min(255, max(0, c0))
    c1 = min(255, max(0, c1))
    c2 = min(255, max(0, c2))
    return c0, c1, c2


@njit(cache=True, nogil=True)
def sse_delta(
    ys: np.ndarray,
    xa: np.ndarray,
    xb: np.ndarray,
    target: np.ndarray,
    canvas: np.ndarray,
    r: int,
    g: int,
    b: int,
    alpha: int,
) -> int:
    """SSE change over covered pixels if (r, g, b, alpha) were blended in."""
    inv = 255 - alpha
    delta = 0
    for i in range(ys.shape[0]):
        y = ys[i]
        for x in range(xa[i], xb[i] + 1):
            for ch in range(3):
                col = r if ch == 0 else (g if ch == 1 else b)
                t = int(target[y, x, ch])
                c = int(canvas[y, x, ch])
                out = (2 * (c * inv + col * alpha) + 255) // 510
                delta += (out - t) * (out - t) - (c - t) * (c - t)
    return delta


@njit(cache=True, nogil=True)
def score_spans(
    ys: np.ndarray,
    xa: np.ndarray,
    xb: np.ndarray,
    target: np.ndarray,
    canvas: np.ndarray,
    alpha: int,
) -> tuple[int, int, int, int, int]:
    """Fused candidate evaluation: optimal color plus its SSE delta.

    Returns (delta, r, g, b, covered_count); empty spans score delta 0.
    """
    r, g, b = solve_color(ys, xa, xb, target, canvas, alpha)
    n = 0
    for i in range(ys.shape[0]):
        n += xb[i] - xa[i] + 1
    if n == 0:
        return 0, 0, 0, 0, 0
    d = sse_delta(ys, xa, xb, target, canvas, r, g, b, alpha)
    return d, r, g, b, n


@njit(cache=True, nogil=True)
def eval_shape(
    geom: int,
    p: np.ndarray,
    target: np.ndarray,
    canvas: np.ndarray,
    alpha: int,
) -> tuple[int, int, int, int, int]:
    """Rasterize and score a candidate in one call (no span round trip).

    Returns (delta, r, g, b, covered_count); the fitter's probe and climb
    loops live on this.
    """
    W = canvas.shape[1]
    H = canvas.shape[0]
    ys, xa, xb = raster_spans(geom, p, W, H)
    return score_spans(ys, xa, xb, target, canvas, alpha)


@njit(cache=True, nogil=True)
def blend_inplace(
    ys: np.ndarray,
    xa: np.ndarray,
    xb: np.ndarray,
    canvas: np.ndarray,
    r: int,
    g: int,
    b: int,
    alpha: int,
) -> None:
    """Alpha-blend (r, g, b, alpha) over the spans; round half up per channel."""
    inv = 255 - alpha
    for i in range(ys.shape[0]):
        y = ys[i]
        for x in range(xa[i], xb[i] + 1):
            for ch in range(3):
                col = r if ch == 0 else (g if ch == 1 else b)
                c = int(canvas[y, x, ch])
                canvas[y, x, ch] = (2 * (c * inv + col * alpha) + 255) // 510

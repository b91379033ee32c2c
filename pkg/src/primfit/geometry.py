"""Primitive shape taxonomy: random generation, mutation, rasterization.

Shapes carry integer pixel parameters and are immutable; all randomness
comes from an explicit RandomStream, so every operation here is a pure
function of (inputs, stream state).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from . import kernels
from .rng import RandomStream

# Search defaults: fresh shapes span at most this many pixels per axis,
# mutation nudges are gaussian with these sigmas, and degenerate triangles
# are re-drawn at most this many times before giving up.
MAX_INIT_EXTENT = 32
MUTATE_SIGMA_PX = 16.0
MUTATE_SIGMA_DEG = 32.0
DEGENERATE_RETRIES = 10


class ShapeKind(IntEnum):
    TRIANGLE = 0
    RECTANGLE = 1
    ROTATED_RECTANGLE = 2
    ELLIPSE = 3
    ROTATED_ELLIPSE = 4
    CIRCLE = 5


ALL_KINDS = tuple(ShapeKind)

# Parameter names per kind, also the field order in serialized documents.
PARAM_NAMES: dict[ShapeKind, tuple[str, ...]] = {
    ShapeKind.TRIANGLE: ("x1", "y1", "x2", "y2", "x3", "y3"),
    ShapeKind.RECTANGLE: ("x1", "y1", "x2", "y2"),
    ShapeKind.ROTATED_RECTANGLE: ("cx", "cy", "w", "h", "angle"),
    ShapeKind.ELLIPSE: ("cx", "cy", "rx", "ry"),
    ShapeKind.ROTATED_ELLIPSE: ("cx", "cy", "rx", "ry", "angle"),
    ShapeKind.CIRCLE: ("cx", "cy", "r"),
}


@dataclass(frozen=True)
class Shape:
    kind: ShapeKind
    params: tuple[int, ...]

    def __post_init__(self):
        expected = len(PARAM_NAMES[self.kind])
        if len(self.params) != expected:
            raise ValueError(
                f"{self.kind.name} takes {expected} params, got {len(self.params)}"
            )

    def canonical(self) -> "Shape":
        """Geometry-preserving normal form (rectangle corners ordered).

        Mutation may leave rectangle corners swapped; coverage and SVG are
        identical either way, so comparisons of round-tripped shapes go
        through this.
        """
        if self.kind == ShapeKind.RECTANGLE:
            x1, y1, x2, y2 = self.params
            return Shape(
                self.kind, (min(x1, x2), min(y1, y2), max(x1, x2), max(y1, y2))
            )
        return self


class SpanList:
    """Per-row pixel coverage: rows strictly increasing, one span per row.

    Spans are stored as parallel int32 arrays (row, first column, last
    column inclusive) so the scoring kernels can consume them directly.
    """

    __slots__ = ("ys", "x1", "x2")

    def __init__(self, ys: np.ndarray, x1: np.ndarray, x2: np.ndarray):
        self.ys = ys
        self.x1 = x1
        self.x2 = x2

    @classmethod
    def empty(cls) -> "SpanList":
        z = np.empty(0, np.int32)
        return cls(z, z, z)

    def __len__(self) -> int:
        return len(self.ys)

    def __iter__(self):
        for i in range(len(self.ys)):
            yield (int(self.ys[i]), int(self.x1[i]), int(self.x2[i]))

    def pixel_count(self) -> int:
        if len(self.ys) == 0:
            return 0
        return int(np.sum(self.x2.astype(np.int64) - self.x1 + 1))


def _clamp(v: int, lo: int, hi: int) -> int:
    return lo if v < lo else (hi if v > hi else v)


def _collinear(p: tuple[int, ...]) -> bool:
    x1, y1, x2, y2, x3, y3 = p
    return (x2 - x1) * (y3 - y1) - (y2 - y1) * (x3 - x1) == 0


def _round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def random_shape(kind: ShapeKind, bounds: tuple[int, int], rng: RandomStream) -> Shape:
    """Draw a shape with a uniform anchor and extents uniform in [1, 32].

    Triangles are re-drawn up to DEGENERATE_RETRIES times if their vertices
    come out collinear after clamping; on canvases too small to host a
    proper triangle the last degenerate draw is returned (it rasterizes to
    at most one pixel).
    """
    W, H = bounds
    if W < 1 or H < 1:
        raise ValueError("canvas bounds must be at least 1x1")
    if kind == ShapeKind.TRIANGLE:
        tri = _random_triangle(W, H, rng)
        for _ in range(DEGENERATE_RETRIES):
            if not _collinear(tri):
                break
            tri = _random_triangle(W, H, rng)
        return Shape(kind, tri)
    ax = rng.randint(0, W - 1)
    ay = rng.randint(0, H - 1)
    if kind == ShapeKind.RECTANGLE:
        x2 = _clamp(ax + rng.randint(1, MAX_INIT_EXTENT), 0, W - 1)
        y2 = _clamp(ay + rng.randint(1, MAX_INIT_EXTENT), 0, H - 1)
        return Shape(kind, (ax, ay, x2, y2))
    if kind == ShapeKind.ROTATED_RECTANGLE:
        w = rng.randint(1, MAX_INIT_EXTENT)
        h = rng.randint(1, MAX_INIT_EXTENT)
        angle = rng.randint(0, 359)
        return Shape(kind, (ax, ay, w, h, angle))
    if kind == ShapeKind.ELLIPSE:
        rx = rng.randint(1, MAX_INIT_EXTENT)
        ry = rng.randint(1, MAX_INIT_EXTENT)
        return Shape(kind, (ax, ay, rx, ry))
    if kind == ShapeKind.ROTATED_ELLIPSE:
        rx = rng.randint(1, MAX_INIT_EXTENT)
        ry = rng.randint(1, MAX_INIT_EXTENT)
        angle = rng.randint(0, 359)
        return Shape(kind, (ax, ay, rx, ry, angle))
    if kind == ShapeKind.CIRCLE:
        return Shape(kind, (ax, ay, rng.randint(1, MAX_INIT_EXTENT)))
    raise ValueError(f"unknown kind {kind!r}")


def _random_triangle(W: int, H: int, rng: RandomStream) -> tuple[int, ...]:
    x1 = rng.randint(0, W - 1)
    y1 = rng.randint(0, H - 1)
    x2 = _clamp(x1 + rng.sign() * rng.randint(1, MAX_INIT_EXTENT), 0, W - 1)
    y2 = _clamp(y1 + rng.sign() * rng.randint(1, MAX_INIT_EXTENT), 0, H - 1)
    x3 = _clamp(x1 + rng.sign() * rng.randint(1, MAX_INIT_EXTENT), 0, W - 1)
    y3 = _clamp(y1 + rng.sign() * rng.randint(1, MAX_INIT_EXTENT), 0, H - 1)
    return (x1, y1, x2, y2, x3, y3)


def _nudge(rng: RandomStream, v: int, lo: int, hi: int, sigma: float) -> int:
    return _clamp(v + _round_half_up(rng.gauss(0.0, sigma)), lo, hi)


def mutate(shape: Shape, bounds: tuple[int, int], rng: RandomStream) -> Shape:
    """Perturb exactly one mutation site; the input shape is untouched.

    Coordinates clamp to the canvas, extents to [1, max(W, H)], angles wrap
    mod 360. A triangle mutation that lands collinear is re-drawn up to
    DEGENERATE_RETRIES times, then the input is returned unchanged.
    """
    W, H = bounds
    ext_hi = max(W, H)
    p = shape.params
    k = shape.kind
    if k == ShapeKind.TRIANGLE:
        for _ in range(DEGENERATE_RETRIES):
            q = list(p)
            vi = rng.randint(0, 2)
            q[2 * vi] = _nudge(rng, q[2 * vi], 0, W - 1, MUTATE_SIGMA_PX)
            q[2 * vi + 1] = _nudge(rng, q[2 * vi + 1], 0, H - 1, MUTATE_SIGMA_PX)
            if not _collinear(tuple(q)):
                return Shape(k, tuple(q))
        return shape
    q = list(p)
    if k == ShapeKind.RECTANGLE:
        site = rng.randint(0, 2)
        if site == 0:
            q[0] = _nudge(rng, q[0], 0, W - 1, MUTATE_SIGMA_PX)
            q[1] = _nudge(rng, q[1], 0, H - 1, MUTATE_SIGMA_PX)
        elif site == 1:
            q[2] = _nudge(rng, q[2], 0, W - 1, MUTATE_SIGMA_PX)
            q[3] = _nudge(rng, q[3], 0, H - 1, MUTATE_SIGMA_PX)
        else:
            dx = _round_half_up(rng.gauss(0.0, MUTATE_SIGMA_PX))
            dy = _round_half_up(rng.gauss(0.0, MUTATE_SIGMA_PX))
            q[0] = _clamp(q[0] + dx, 0, W - 1)
            q[2] = _clamp(q[2] + dx, 0, W - 1)
            q[1] = _clamp(q[1] + dy, 0, H - 1)
            q[3] = _clamp(q[3] + dy, 0, H - 1)
    elif k == ShapeKind.ROTATED_RECTANGLE:
        site = rng.randint(0, 3)
        if site == 0:
            q[0] = _nudge(rng, q[0], 0, W - 1, MUTATE_SIGMA_PX)
            q[1] = _nudge(rng, q[1], 0, H - 1, MUTATE_SIGMA_PX)
        elif site == 1:
            q[2] = _nudge(rng, q[2], 1, ext_hi, MUTATE_SIGMA_PX)
        elif site == 2:
            q[3] = _nudge(rng, q[3], 1, ext_hi, MUTATE_SIGMA_PX)
        else:
            q[4] = (q[4] + _round_half_up(rng.gauss(0.0, MUTATE_SIGMA_DEG))) % 360
    elif k == ShapeKind.ELLIPSE:
        site = rng.randint(0, 2)
        if site == 0:
            q[0] = _nudge(rng, q[0], 0, W - 1, MUTATE_SIGMA_PX)
            q[1] = _nudge(rng, q[1], 0, H - 1, MUTATE_SIGMA_PX)
        elif site == 1:
            q[2] = _nudge(rng, q[2], 1, ext_hi, MUTATE_SIGMA_PX)
        else:
            q[3] = _nudge(rng, q[3], 1, ext_hi, MUTATE_SIGMA_PX)
    elif k == ShapeKind.ROTATED_ELLIPSE:
        site = rng.randint(0, 3)
        if site == 0:
            q[0] = _nudge(rng, q[0], 0, W - 1, MUTATE_SIGMA_PX)
            q[1] = _nudge(rng, q[1], 0, H - 1, MUTATE_SIGMA_PX)
        elif site == 1:
            q[2] = _nudge(rng, q[2], 1, ext_hi, MUTATE_SIGMA_PX)
        elif site == 2:
            q[3] = _nudge(rng, q[3], 1, ext_hi, MUTATE_SIGMA_PX)
        else:
            q[4] = (q[4] + _round_half_up(rng.gauss(0.0, MUTATE_SIGMA_DEG))) % 360
    elif k == ShapeKind.CIRCLE:
        site = rng.randint(0, 1)
        if site == 0:
            q[0] = _nudge(rng, q[0], 0, W - 1, MUTATE_SIGMA_PX)
            q[1] = _nudge(rng, q[1], 0, H - 1, MUTATE_SIGMA_PX)
        else:
            q[2] = _nudge(rng, q[2], 1, ext_hi, MUTATE_SIGMA_PX)
    else:
        raise ValueError(f"unknown kind {k!r}")
    return Shape(k, tuple(q))


def kernel_params(shape: Shape, sx: float = 1.0, sy: float = 1.0) -> tuple[int, np.ndarray]:
    """Map a shape to (geometry class, float parameter vector) for kernels.

    sx/sy scale the shape into a resized coordinate space; rotated extents
    use the mean scale since anisotropic scaling of a rotated shape is not
    representable in this parameterization (scales differ by <1% for
    aspect-preserving resizes).
    """
    p = np.zeros(8, np.float64)
    return fill_kernel_params(shape, p, sx, sy), p


def fill_kernel_params(
    shape: Shape, p: np.ndarray, sx: float = 1.0, sy: float = 1.0
) -> int:
    """kernel_params into a caller-owned buffer (hot path, no allocation)."""
    pr = shape.params
    k = shape.kind
    if k == ShapeKind.TRIANGLE:
        p[0] = pr[0] * sx
        p[1] = pr[1] * sy
        p[2] = pr[2] * sx
        p[3] = pr[3] * sy
        p[4] = pr[4] * sx
        p[5] = pr[5] * sy
        return kernels.GEOM_TRIANGLE
    if k == ShapeKind.RECTANGLE:
        x1, x2 = min(pr[0], pr[2]), max(pr[0], pr[2])
        y1, y2 = min(pr[1], pr[3]), max(pr[1], pr[3])
        p[0] = x1 * sx
        p[1] = y1 * sy
        p[2] = (x2 + 1) * sx
        p[3] = (y2 + 1) * sy
        return kernels.GEOM_BOX
    sm = (sx + sy) * 0.5
    if k == ShapeKind.ROTATED_RECTANGLE:
        rad = math.radians(pr[4])
        p[0] = pr[0] * sx
        p[1] = pr[1] * sy
        p[2] = pr[2] * sm
        p[3] = pr[3] * sm
        p[4] = math.cos(rad)
        p[5] = math.sin(rad)
        return kernels.GEOM_ROT_RECT
    if k == ShapeKind.ELLIPSE:
        p[0] = pr[0] * sx
        p[1] = pr[1] * sy
        p[2] = pr[2] * sx
        p[3] = pr[3] * sy
        return kernels.GEOM_ELLIPSE
    if k == ShapeKind.ROTATED_ELLIPSE:
        rad = math.radians(pr[4])
        p[0] = pr[0] * sx
        p[1] = pr[1] * sy
        p[2] = pr[2] * sm
        p[3] = pr[3] * sm
        p[4] = math.cos(rad)
        p[5] = math.sin(rad)
        return kernels.GEOM_ROT_ELLIPSE
    if k == ShapeKind.CIRCLE:
        p[0] = pr[0] * sx
        p[1] = pr[1] * sy
        p[2] = pr[2] * sx
        p[3] = pr[2] * sy
        return kernels.GEOM_ELLIPSE
    raise ValueError(f"unknown kind {k!r}")


def rasterize(shape: Shape, bounds: tuple[int, int]) -> SpanList:
    """Exact coverage under the pixel-center fill rule, clipped to bounds."""
    W, H = bounds
    geom, p = kernel_params(shape)
    ys, x1, x2 = kernels.raster_spans(geom, p, W, H)
    return SpanList(ys, x1, x2)


def rasterize_scaled(
    shape: Shape, sx: float, sy: float, bounds: tuple[int, int]
) -> SpanList:
    """Coverage of the shape scaled by (sx, sy) into a larger/smaller canvas."""
    W, H = bounds
    geom, p = kernel_params(shape, sx, sy)
    ys, x1, x2 = kernels.raster_spans(geom, p, W, H)
    return SpanList(ys, x1, x2)

"""Pixel buffers and exact integer scoring.

SSE is accumulated as exact 64-bit integers (RMSE derived on demand) so the
incremental score path can be checked against full recomputation with zero
tolerance. All channel quantization rounds half up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import kernels
from .geometry import Shape, SpanList


@dataclass(frozen=True)
class Color:
    r: int
    g: int
    b: int
    a: int = 255

    def __post_init__(self):
        for v in (self.r, self.g, self.b, self.a):
            if not 0 <= v <= 255:
                raise ValueError(f"channel out of range: {v}")

    def rgb(self) -> tuple[int, int, int]:
        return (self.r, self.g, self.b)


@dataclass(frozen=True)
class PlacedShape:
    """A shape plus the fill color (with alpha) it was committed with."""

    shape: Shape
    color: Color


class RasterImage:
    """Fixed-size RGB buffer, (H, W, 3) uint8 row-major."""

    __slots__ = ("px",)

    def __init__(self, px: np.ndarray):
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ValueError("expected (H, W, 3) uint8 array")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        self.px = np.ascontiguousarray(px)

    @property
    def w(self) -> int:
        return self.px.shape[1]

    @property
    def h(self) -> int:
        return self.px.shape[0]

    @classmethod
    def filled(cls, w: int, h: int, color: Color) -> "RasterImage":
        px = np.empty((h, w, 3), np.uint8)
        px[:, :] = color.rgb()
        return cls(px)

    def copy(self) -> "RasterImage":
        return RasterImage(self.px.copy())

    def same_pixels(self, other: "RasterImage") -> bool:
        return self.px.shape == other.px.shape and np.array_equal(self.px, other.px)


@dataclass(frozen=True)
class Score:
    """Exact sum of squared channel differences plus its RMSE view."""

    sse: int
    pixel_count: int

    @property
    def rmse(self) -> float:
        return math.sqrt(self.sse / (self.pixel_count * 3))


def load_image(path: str | Path) -> RasterImage:
    """Decode a PNG or JPEG file into an RGB buffer."""
    with Image.open(path) as im:
        return RasterImage(np.asarray(im.convert("RGB"), dtype=np.uint8))


def save_png(img: RasterImage, path: str | Path) -> int:
    """Encode as PNG; returns the byte size written."""
    Image.fromarray(img.px, mode="RGB").save(path, format="PNG")
    return Path(path).stat().st_size


def encode_png_bytes(img: RasterImage) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(img.px, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def resize_to_working(img: RasterImage, working_size: int) -> RasterImage:
    """Bilinear resize so max(W, H) == working_size, aspect preserved."""
    if max(img.w, img.h) == working_size:
        return img
    scale = working_size / max(img.w, img.h)
    nw = max(1, math.floor(img.w * scale + 0.5))
    nh = max(1, math.floor(img.h * scale + 0.5))
    if img.w >= img.h:
        nw = working_size
    else:
        nh = working_size
    pil = Image.fromarray(img.px, mode="RGB").resize((nw, nh), Image.BILINEAR)
    return RasterImage(np.asarray(pil, dtype=np.uint8))


def full_sse(a: RasterImage, b: RasterImage) -> Score:
    """Exact SSE between two equal-sized images."""
    if (a.w, a.h) != (b.w, b.h):
        raise ValueError(f"dimension mismatch: {a.w}x{a.h} vs {b.w}x{b.h}")
    diff = a.px.astype(np.int64) - b.px.astype(np.int64)
    return Score(int(np.sum(diff * diff)), a.w * a.h)


def _check_spans(img: RasterImage, spans: SpanList) -> None:
    if len(spans) == 0:
        return
    if (
        int(spans.ys.min()) < 0
        or int(spans.ys.max()) >= img.h
        or int(spans.x1.min()) < 0
        or int(spans.x2.max()) >= img.w
        or bool(np.any(spans.x1 > spans.x2))
    ):
        raise ValueError("spans out of canvas bounds")


def blend_spans(canvas: RasterImage, spans: SpanList, color: Color) -> RasterImage:
    """Alpha-blend the color over the covered pixels of a copy of canvas.

    out = round_half_up(cur * (255 - a) / 255 + c * a / 255) per channel;
    uncovered pixels are bit-equal to the input.
    """
    _check_spans(canvas, spans)
    out = canvas.copy()
    kernels.blend_inplace(
        spans.ys, spans.x1, spans.x2, out.px, color.r, color.g, color.b, color.a
    )
    return out


def blend_spans_inplace(canvas: RasterImage, spans: SpanList, color: Color) -> None:
    """In-place variant of blend_spans for single-owner canvases."""
    _check_spans(canvas, spans)
    kernels.blend_inplace(
        spans.ys, spans.x1, spans.x2, canvas.px, color.r, color.g, color.b, color.a
    )


def optimal_color(
    target: RasterImage, canvas: RasterImage, spans: SpanList, alpha: int
) -> Color:
    """Channel values minimizing post-blend SSE over the covered pixels."""
    if len(spans) == 0 or spans.pixel_count() == 0:
        raise ValueError("optimal_color needs non-empty spans")
    if not 1 <= alpha <= 255:
        raise ValueError("alpha must be in [1, 255]")
    _check_spans(canvas, spans)
    r, g, b = kernels.solve_color(
        spans.ys, spans.x1, spans.x2, target.px, canvas.px, alpha
    )
    return Color(int(r), int(g), int(b), alpha)


def sse_delta(
    target: RasterImage,
    canvas: RasterImage,
    spans: SpanList,
    color: Color,
) -> int:
    """SSE change if color were blended over the spans; exact, signed."""
    _check_spans(canvas, spans)
    return int(
        kernels.sse_delta(
            spans.ys,
            spans.x1,
            spans.x2,
            target.px,
            canvas.px,
            color.r,
            color.g,
            color.b,
            color.a,
        )
    )


def background_color(target: RasterImage) -> Color:
    """Per-channel mean of the whole image, rounded half up, opaque."""
    n = target.w * target.h
    sums = target.px.reshape(-1, 3).sum(axis=0, dtype=np.int64)
    vals = [(2 * int(s) + n) // (2 * n) for s in sums]
    return Color(vals[0], vals[1], vals[2], 255)


def luma_histogram(img: RasterImage) -> np.ndarray:
    """256-bin histogram of round_half_up(0.299 r + 0.587 g + 0.114 b)."""
    px = img.px.reshape(-1, 3).astype(np.int64)
    scaled = 299 * px[:, 0] + 587 * px[:, 1] + 114 * px[:, 2]
    luma = (2 * scaled + 1000) // 2000
    return np.bincount(luma, minlength=256)


def shannon_entropy(img: RasterImage) -> float:
    """Entropy in bits of the grayscale histogram, in [0, 8]."""
    hist = luma_histogram(img)
    counts = hist[hist > 0].astype(np.float64)
    p = counts / counts.sum()
    return float(-np.sum(p * np.log2(p)))

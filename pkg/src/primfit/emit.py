"""Deterministic serialization: SVG views, archival JSON, exact re-render.

The shape-list JSON is the archival format (integer geometry, exact
replay); SVG is a byte-deterministic view of it. Rendering a document at
working resolution uses the same rasterize/blend kernels as the fitter, so
it reproduces the fitter's canvas bit for bit.
"""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass

from .geometry import PARAM_NAMES, Shape, ShapeKind, rasterize, rasterize_scaled
from .raster import Color, PlacedShape, RasterImage, blend_spans_inplace, encode_png_bytes

SVG_NS = "http://www.w3.org/2000/svg"

_KIND_TAGS: dict[ShapeKind, str] = {
    ShapeKind.TRIANGLE: "triangle",
    ShapeKind.RECTANGLE: "rect",
    ShapeKind.ROTATED_RECTANGLE: "rrect",
    ShapeKind.ELLIPSE: "ellipse",
    ShapeKind.ROTATED_ELLIPSE: "rellipse",
    ShapeKind.CIRCLE: "circle",
}
_TAG_KINDS = {v: k for k, v in _KIND_TAGS.items()}


@dataclass(frozen=True)
class ShapeListDocument:
    """Replayable record of one fitted image at one abstraction level."""

    w0: int
    h0: int
    w: int
    h: int
    bg: Color
    shapes: tuple[PlacedShape, ...]
    version: int = 1


def _fmt(v: float) -> str:
    """Locale-free minimal decimal rendering for coordinates and scales."""
    if v == int(v):
        return str(int(v))
    s = f"{v:.8f}".rstrip("0").rstrip(".")
    return s if s else "0"


def _hex6(c: Color) -> str:
    return f"#{c.r:02x}{c.g:02x}{c.b:02x}"


def _element(ps: PlacedShape) -> str:
    """One SVG element per placed shape, fixed attribute order."""
    s = ps.shape
    p = s.params
    fill = f'fill="{_hex6(ps.color)}" fill-opacity="{ps.color.a / 255:.4f}"'
    if s.kind == ShapeKind.TRIANGLE:
        pts = f"{p[0]},{p[1]} {p[2]},{p[3]} {p[4]},{p[5]}"
        return f'<polygon points="{pts}" {fill}/>'
    if s.kind == ShapeKind.RECTANGLE:
        x1, x2 = min(p[0], p[2]), max(p[0], p[2])
        y1, y2 = min(p[1], p[3]), max(p[1], p[3])
        return (
            f'<rect x="{x1}" y="{y1}" width="{x2 - x1 + 1}" '
            f'height="{y2 - y1 + 1}" {fill}/>'
        )
    if s.kind == ShapeKind.ROTATED_RECTANGLE:
        cx, cy, w, h, a = p
        return (
            f'<rect x="{_fmt(cx - w / 2)}" y="{_fmt(cy - h / 2)}" '
            f'width="{w}" height="{h}" '
            f'transform="rotate({a} {cx} {cy})" {fill}/>'
        )
    if s.kind == ShapeKind.ELLIPSE:
        return f'<ellipse cx="{p[0]}" cy="{p[1]}" rx="{p[2]}" ry="{p[3]}" {fill}/>'
    if s.kind == ShapeKind.ROTATED_ELLIPSE:
        cx, cy, rx, ry, a = p
        return (
            f'<ellipse cx="{cx}" cy="{cy}" rx="{rx}" ry="{ry}" '
            f'transform="rotate({a} {cx} {cy})" {fill}/>'
        )
    if s.kind == ShapeKind.CIRCLE:
        return f'<circle cx="{p[0]}" cy="{p[1]}" r="{p[2]}" {fill}/>'
    raise ValueError(f"unknown kind {s.kind!r}")


def emit_svg(doc: ShapeListDocument) -> str:
    """Byte-deterministic SVG: one background rect plus one element per shape.

    Geometry stays in working coordinates; a single root group scales to the
    original dimensions.
    """
    sx = doc.w0 / doc.w
    sy = doc.h0 / doc.h
    lines = [
        f'<svg xmlns="{SVG_NS}" width="{doc.w0}" height="{doc.h0}" '
        f'viewBox="0 0 {doc.w0} {doc.h0}">',
        f'<g transform="scale({_fmt(sx)} {_fmt(sy)})">',
        f'<rect x="0" y="0" width="{doc.w}" height="{doc.h}" fill="{_hex6(doc.bg)}"/>',
    ]
    lines.extend(_element(ps) for ps in doc.shapes)
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


_ROTATE_RE = re.compile(r"^rotate\((-?\d+) (-?\d+) (-?\d+)\)$")


def _parse_color(attr: str) -> tuple[int, int, int]:
    if not attr.startswith("#"):
        raise ValueError(f"unsupported fill {attr!r}")
    hexpart = attr[1:]
    if len(hexpart) == 3:
        hexpart = "".join(ch * 2 for ch in hexpart)
    if len(hexpart) != 6:
        raise ValueError(f"unsupported fill {attr!r}")
    return tuple(int(hexpart[i : i + 2], 16) for i in (0, 2, 4))


def _parse_alpha(el: ET.Element) -> int:
    op = el.get("fill-opacity")
    if op is None:
        return 255
    return int(float(op) * 255 + 0.5)


def _int_attr(el: ET.Element, name: str) -> int:
    v = el.get(name)
    if v is None:
        raise ValueError(f"missing attribute {name}")
    return int(v)


def parse_svg(text: str) -> ShapeListDocument:
    """Recover the document from SVG emitted by emit_svg (or its minification)."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as e:
        raise ValueError(f"not parseable SVG: {e}") from e
    if root.tag != f"{{{SVG_NS}}}svg":
        raise ValueError("root element is not svg")
    w0 = int(root.get("width", ""))
    h0 = int(root.get("height", ""))
    groups = list(root)
    if len(groups) != 1 or groups[0].tag != f"{{{SVG_NS}}}g":
        raise ValueError("expected a single scale group")
    children = list(groups[0])
    if not children:
        raise ValueError("missing background rectangle")
    bgel = children[0]
    if bgel.tag != f"{{{SVG_NS}}}rect" or bgel.get("fill-opacity") is not None:
        raise ValueError("missing background rectangle")
    w = _int_attr(bgel, "width")
    h = _int_attr(bgel, "height")
    bg = Color(*_parse_color(bgel.get("fill", "")), 255)

    shapes: list[PlacedShape] = []
    for el in children[1:]:
        tag = el.tag.removeprefix(f"{{{SVG_NS}}}")
        rgb = _parse_color(el.get("fill", ""))
        alpha = _parse_alpha(el)
        transform = el.get("transform")
        angle = None
        if transform is not None:
            m = _ROTATE_RE.match(transform)
            if not m:
                raise ValueError(f"unsupported transform {transform!r}")
            angle = int(m.group(1))
        if tag == "polygon":
            pts = el.get("points", "")
            nums = [int(v) for pair in pts.split(" ") for v in pair.split(",")]
            if len(nums) != 6:
                raise ValueError(f"unsupported polygon points {pts!r}")
            shape = Shape(ShapeKind.TRIANGLE, tuple(nums))
        elif tag == "rect":
            wd = _int_attr(el, "width")
            ht = _int_attr(el, "height")
            if angle is None:
                x = _int_attr(el, "x")
                y = _int_attr(el, "y")
                shape = Shape(
                    ShapeKind.RECTANGLE, (x, y, x + wd - 1, y + ht - 1)
                )
            else:
                # The rotate() pivot carries the integer center exactly.
                m = _ROTATE_RE.match(transform or "")
                assert m is not None
                shape = Shape(
                    ShapeKind.ROTATED_RECTANGLE,
                    (int(m.group(2)), int(m.group(3)), wd, ht, angle),
                )
        elif tag == "ellipse":
            cx = _int_attr(el, "cx")
            cy = _int_attr(el, "cy")
            rx = _int_attr(el, "rx")
            ry = _int_attr(el, "ry")
            if angle is None:
                shape = Shape(ShapeKind.ELLIPSE, (cx, cy, rx, ry))
            else:
                shape = Shape(ShapeKind.ROTATED_ELLIPSE, (cx, cy, rx, ry, angle))
        elif tag == "circle":
            shape = Shape(
                ShapeKind.CIRCLE,
                (_int_attr(el, "cx"), _int_attr(el, "cy"), _int_attr(el, "r")),
            )
        else:
            raise ValueError(f"unsupported element {tag!r}")
        shapes.append(PlacedShape(shape, Color(*rgb, alpha)))
    return ShapeListDocument(w0=w0, h0=h0, w=w, h=h, bg=bg, shapes=tuple(shapes))


def render(doc: ShapeListDocument, at: str = "working") -> RasterImage:
    """Replay the document into pixels.

    At working resolution this bit-equals the canvas the fitter ended with.
    At original resolution shapes are scaled before rasterization (rotated
    kinds use the mean axis scale, see geometry.kernel_params).
    """
    if at == "working":
        canvas = RasterImage.filled(doc.w, doc.h, doc.bg)
        for ps in doc.shapes:
            spans = rasterize(ps.shape, (doc.w, doc.h))
            blend_spans_inplace(canvas, spans, ps.color)
        return canvas
    if at == "original":
        canvas = RasterImage.filled(doc.w0, doc.h0, doc.bg)
        sx = doc.w0 / doc.w
        sy = doc.h0 / doc.h
        for ps in doc.shapes:
            spans = rasterize_scaled(ps.shape, sx, sy, (doc.w0, doc.h0))
            blend_spans_inplace(canvas, spans, ps.color)
        return canvas
    raise ValueError("at must be 'working' or 'original'")


_HEX_COLLAPSE_RE = re.compile(
    r'fill="#([0-9a-f])\1([0-9a-f])\2([0-9a-f])\3"'
)
_OPACITY_RE = re.compile(r'fill-opacity="([0-9.]+)"')


def minify_svg(svg: str) -> str:
    """Lossless shrink of emitted SVG: geometry and colors parse identically."""
    parse_svg(svg)  # only our emitted subset is supported
    out = svg.replace("\n", "")
    out = _HEX_COLLAPSE_RE.sub(r'fill="#\1\2\3"', out)

    def trim(m: re.Match) -> str:
        v = m.group(1)
        if "." in v:
            v = v.rstrip("0").rstrip(".")
        return f'fill-opacity="{v or "0"}"'

    return _OPACITY_RE.sub(trim, out)


@dataclass(frozen=True)
class SizeReport:
    svg_bytes: int
    minified_bytes: int
    png_bytes: int
    per_kind_mean_element_bytes: dict[str, float]


def size_report(doc: ShapeListDocument) -> SizeReport:
    """Byte counts of each serialization plus per-kind mean element length."""
    svg = emit_svg(doc)
    mini = minify_svg(svg)
    png = encode_png_bytes(render(doc, "working"))
    sizes: dict[str, list[int]] = {}
    for ps in doc.shapes:
        sizes.setdefault(_KIND_TAGS[ps.shape.kind], []).append(
            len(_element(ps).encode("utf-8"))
        )
    means = {k: sum(v) / len(v) for k, v in sorted(sizes.items())}
    return SizeReport(
        svg_bytes=len(svg.encode("utf-8")),
        minified_bytes=len(mini.encode("utf-8")),
        png_bytes=len(png),
        per_kind_mean_element_bytes=means,
    )


def document_to_json(doc: ShapeListDocument) -> str:
    """Compact archival JSON with fixed field order and integer geometry."""
    shapes = []
    for ps in doc.shapes:
        rec: dict = {"kind": _KIND_TAGS[ps.shape.kind]}
        for name, value in zip(PARAM_NAMES[ps.shape.kind], ps.shape.params):
            rec[name] = int(value)
        rec["rgb"] = [ps.color.r, ps.color.g, ps.color.b]
        rec["a"] = ps.color.a
        shapes.append(rec)
    payload = {
        "v": doc.version,
        "w0": doc.w0,
        "h0": doc.h0,
        "w": doc.w,
        "h": doc.h,
        "bg": [doc.bg.r, doc.bg.g, doc.bg.b],
        "shapes": shapes,
    }
    return json.dumps(payload, separators=(",", ":")) + "\n"


def document_from_json(text: str) -> ShapeListDocument:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(f"not a shape-list document: {e}") from e
    try:
        if payload["v"] != 1:
            raise ValueError(f"unsupported document version {payload['v']!r}")
        shapes = []
        for rec in payload["shapes"]:
            kind = _TAG_KINDS[rec["kind"]]
            params = tuple(int(rec[name]) for name in PARAM_NAMES[kind])
            r, g, b = rec["rgb"]
            shapes.append(PlacedShape(Shape(kind, params), Color(r, g, b, rec["a"])))
        return ShapeListDocument(
            w0=int(payload["w0"]),
            h0=int(payload["h0"]),
            w=int(payload["w"]),
            h=int(payload["h"]),
            bg=Color(*payload["bg"], 255),
            shapes=tuple(shapes),
        )
    except (KeyError, TypeError) as e:
        raise ValueError(f"not a shape-list document: {e}") from e

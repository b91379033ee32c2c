"""Serialization: SVG emission/parsing, minify, render, sizes, JSON."""

from __future__ import annotations

import numpy as np
import pytest

from primfit import emit
from primfit.emit import (
    ShapeListDocument,
    document_from_json,
    document_to_json,
    emit_svg,
    minify_svg,
    parse_svg,
    render,
    size_report,
)
from primfit.fitter import FitConfig, fit
from primfit.geometry import ALL_KINDS, Shape, ShapeKind, random_shape
from primfit.raster import Color, PlacedShape, RasterImage
from primfit.rng import RandomStream

from conftest import synth_photo

GOLDEN_DOC = ShapeListDocument(
    w0=20,
    h0=10,
    w=10,
    h=5,
    bg=Color(16, 32, 48, 255),
    shapes=(
        PlacedShape(Shape(ShapeKind.TRIANGLE, (0, 0, 9, 0, 0, 4)), Color(255, 0, 128, 128)),
        PlacedShape(Shape(ShapeKind.ROTATED_RECTANGLE, (5, 2, 3, 2, 45)), Color(17, 34, 51, 255)),
        PlacedShape(Shape(ShapeKind.CIRCLE, (7, 3, 2)), Color(170, 187, 204, 64)),
    ),
)

# Byte-frozen on first emission; emit determinism means this never drifts.
GOLDEN_SVG = (
    '<svg xmlns="http://www.w3.org/2000/svg" width="20" height="10" viewBox="0 0 20 10">\n'
    '<g transform="scale(2 2)">\n'
    '<rect x="0" y="0" width="10" height="5" fill="#102030"/>\n'
    '<polygon points="0,0 9,0 0,4" fill="#ff0080" fill-opacity="0.5020"/>\n'
    '<rect x="3.5" y="1" width="3" height="2" transform="rotate(45 5 2)" fill="#112233" fill-opacity="1.0000"/>\n'
    '<circle cx="7" cy="3" r="2" fill="#aabbcc" fill-opacity="0.2510"/>\n'
    "</g>\n"
    "</svg>\n"
)

GOLDEN_MINIFIED = (
    '<svg xmlns="http://www.w3.org/2000/svg" width="20" height="10" viewBox="0 0 20 10">'
    '<g transform="scale(2 2)"><rect x="0" y="0" width="10" height="5" fill="#102030"/>'
    '<polygon points="0,0 9,0 0,4" fill="#ff0080" fill-opacity="0.502"/>'
    '<rect x="3.5" y="1" width="3" height="2" transform="rotate(45 5 2)" fill="#123" fill-opacity="1"/>'
    '<circle cx="7" cy="3" r="2" fill="#abc" fill-opacity="0.251"/></g></svg>'
)

GOLDEN_JSON = (
    '{"v":1,"w0":20,"h0":10,"w":10,"h":5,"bg":[16,32,48],"shapes":['
    '{"kind":"triangle","x1":0,"y1":0,"x2":9,"y2":0,"x3":0,"y3":4,"rgb":[255,0,128],"a":128},'
    '{"kind":"rrect","cx":5,"cy":2,"w":3,"h":2,"angle":45,"rgb":[17,34,51],"a":255},'
    '{"kind":"circle","cx":7,"cy":3,"r":2,"rgb":[170,187,204],"a":64}]}\n'
)


def _random_doc(seed: int, n: int = 12, w: int = 24, h: int = 20) -> ShapeListDocument:
    rng = RandomStream(seed)
    shapes = []
    for i in range(n):
        s = random_shape(ALL_KINDS[i % 6], (w, h), rng)
        shapes.append(
            PlacedShape(
                s,
                Color(
                    rng.randint(0, 255), rng.randint(0, 255), rng.randint(0, 255),
                    rng.randint(1, 255),
                ),
            )
        )
    return ShapeListDocument(
        w0=w * 2, h0=h * 2, w=w, h=h, bg=Color(5, 6, 7, 255), shapes=tuple(shapes)
    )


def test_golden_svg_bytes():
    assert emit_svg(GOLDEN_DOC) == GOLDEN_SVG


def test_golden_minified_bytes():
    assert minify_svg(GOLDEN_SVG) == GOLDEN_MINIFIED


def test_golden_json_bytes():
    assert document_to_json(GOLDEN_DOC) == GOLDEN_JSON


def test_emit_background_only():
    doc = ShapeListDocument(w0=10, h0=10, w=10, h=10, bg=Color(0, 0, 0, 255), shapes=())
    svg = emit_svg(doc)
    assert svg.count("<rect") == 1
    assert 'width="10" height="10" fill="#000000"' in svg
    assert "fill-opacity" not in svg


def test_emit_one_opaque_triangle():
    doc = ShapeListDocument(
        w0=10, h0=10, w=10, h=10, bg=Color(0, 0, 0, 255),
        shapes=(PlacedShape(Shape(ShapeKind.TRIANGLE, (0, 0, 5, 0, 0, 5)), Color(1, 2, 3, 255)),),
    )
    svg = emit_svg(doc)
    drawables = svg.count("<rect") + svg.count("<polygon")
    assert drawables == 2
    assert 'fill-opacity="1.0000"' in svg


def test_emit_deterministic():
    doc = _random_doc(1)
    assert emit_svg(doc) == emit_svg(doc)
    assert emit_svg(doc).encode() == emit_svg(_random_doc(1)).encode()


def test_parse_roundtrip_random_docs():
    for seed in range(8):
        doc = _random_doc(seed)
        back = parse_svg(emit_svg(doc))
        assert back == doc


def test_parse_roundtrip_swapped_rectangle_corners():
    # Mutation can leave x1 > x2; the SVG view normalizes corner order but
    # keeps geometry, color, and render output identical.
    doc = ShapeListDocument(
        w0=12, h0=12, w=12, h=12, bg=Color(0, 0, 0, 255),
        shapes=(
            PlacedShape(Shape(ShapeKind.RECTANGLE, (9, 2, 4, 7)), Color(5, 6, 7, 128)),
        ),
    )
    back = parse_svg(emit_svg(doc))
    assert back.shapes[0].shape == Shape(ShapeKind.RECTANGLE, (4, 2, 9, 7))
    assert back.shapes[0].shape == doc.shapes[0].shape.canonical()
    assert back.shapes[0].color == doc.shapes[0].color
    assert render(back, "working").same_pixels(render(doc, "working"))


def test_parse_roundtrip_minified():
    for seed in range(4):
        doc = _random_doc(seed + 100)
        back = parse_svg(minify_svg(emit_svg(doc)))
        assert back == doc


def test_minify_idempotent_and_shorter():
    for seed in range(6):
        svg = emit_svg(_random_doc(seed + 50))
        mini = minify_svg(svg)
        assert len(mini.encode()) <= len(svg.encode())
        assert minify_svg(mini) == mini


def test_minify_rejects_foreign_svg():
    with pytest.raises(ValueError):
        minify_svg('<svg xmlns="http://www.w3.org/2000/svg"><path d="M0 0"/></svg>')
    with pytest.raises(ValueError):
        minify_svg("not xml at all")


def test_hex_collapse_only_when_lossless():
    doc = ShapeListDocument(
        w0=4, h0=4, w=4, h=4, bg=Color(0, 0, 0, 255),
        shapes=(
            PlacedShape(Shape(ShapeKind.CIRCLE, (1, 1, 1)), Color(0xAA, 0xBB, 0xCC, 128)),
            PlacedShape(Shape(ShapeKind.CIRCLE, (2, 2, 1)), Color(0xAB, 0xBC, 0xCD, 128)),
        ),
    )
    mini = minify_svg(emit_svg(doc))
    assert 'fill="#abc"' in mini
    assert 'fill="#abbccd"' in mini


def test_render_empty_doc_is_background():
    doc = ShapeListDocument(w0=6, h0=4, w=6, h=4, bg=Color(9, 10, 11, 255), shapes=())
    img = render(doc, "working")
    assert np.all(img.px == (9, 10, 11))


def test_render_working_equals_fitter_canvas():
    img = RasterImage(synth_photo(60, 40, 32))
    cfg = FitConfig(checkpoints=(6,), probes=16, climbers=2, max_age=5,
                    working_size=40, seed=21)
    state, _, _ = fit(img, cfg)
    replay = render(state.document(), "working")
    assert replay.same_pixels(state.canvas)


def test_render_original_scales_coverage():
    base = _random_doc(7, n=4, w=16, h=16)
    doc1 = ShapeListDocument(w0=16, h0=16, w=16, h=16, bg=base.bg, shapes=base.shapes)
    doc2 = ShapeListDocument(w0=32, h0=32, w=16, h=16, bg=base.bg, shapes=base.shapes)
    img1 = render(doc1, "original")
    img2 = render(doc2, "original")
    assert (img2.w, img2.h) == (32, 32)

    def bbox(img, bg):
        mask = np.any(img.px != bg, axis=2)
        if not mask.any():
            return None
        ys, xs = np.nonzero(mask)
        return xs.min(), xs.max(), ys.min(), ys.max()

    b1 = bbox(img1, (5, 6, 7))
    b2 = bbox(img2, (5, 6, 7))
    assert b1 is not None and b2 is not None
    for small, big, *_ in [(b1[0], b2[0]), (b1[2], b2[2])]:
        assert abs(big - small * 2) <= 2
    for small, big in [(b1[1], b2[1]), (b1[3], b2[3])]:
        assert abs(big - (small * 2 + 1)) <= 2


def test_size_report_background_only():
    doc = ShapeListDocument(w0=8, h0=8, w=8, h=8, bg=Color(1, 2, 3, 255), shapes=())
    rep = size_report(doc)
    assert rep.per_kind_mean_element_bytes == {}
    assert rep.svg_bytes > 0 and rep.minified_bytes <= rep.svg_bytes
    assert rep.png_bytes > 0


def test_size_report_triangle_cheaper_than_rotated_ellipse():
    rng = RandomStream(31)
    shapes = []
    for i in range(20):
        shapes.append(
            PlacedShape(
                random_shape(ShapeKind.TRIANGLE, (32, 32), rng),
                Color(10, 20, 30, 128),
            )
        )
        shapes.append(
            PlacedShape(
                random_shape(ShapeKind.ROTATED_ELLIPSE, (32, 32), rng),
                Color(10, 20, 30, 128),
            )
        )
    doc = ShapeListDocument(
        w0=32, h0=32, w=32, h=32, bg=Color(0, 0, 0, 255), shapes=tuple(shapes)
    )
    rep = size_report(doc)
    per = rep.per_kind_mean_element_bytes
    assert per["triangle"] < per["rellipse"]


def test_json_roundtrip_random_docs():
    for seed in range(6):
        doc = _random_doc(seed + 200)
        assert document_from_json(document_to_json(doc)) == doc


def test_json_rejects_malformed():
    with pytest.raises(ValueError):
        document_from_json("{")
    with pytest.raises(ValueError):
        document_from_json('{"v":2,"w0":1,"h0":1,"w":1,"h":1,"bg":[0,0,0],"shapes":[]}')
    with pytest.raises(ValueError):
        document_from_json('{"v":1}')


def test_parse_rejects_foreign_elements():
    with pytest.raises(ValueError):
        parse_svg('<svg xmlns="http://www.w3.org/2000/svg" width="2" height="2">'
                  '<g transform="scale(1 1)"><rect x="0" y="0" width="2" height="2" fill="#000000"/>'
                  "<line/></g></svg>")


def test_opacity_alpha_roundtrip_all_values():
    # 4-decimal fill-opacity must recover every alpha byte exactly.
    for alpha in range(1, 256):
        op = f"{alpha / 255:.4f}"
        assert int(float(op) * 255 + 0.5) == alpha

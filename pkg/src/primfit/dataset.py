"""Batch orchestration over a class-structured image corpus.

Walks root/<class>/<image>.{png,jpg,jpeg}, fits every image at all
configured modes and levels, writes svg/json/png outputs mirroring the
class structure, and appends one manifest line per image. Per-image seeds
are derived from the source path, so manifests are byte-identical for any
worker count and across crash/resume boundaries.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import emit
from .fitter import FitConfig, fit
from .raster import load_image, save_png, shannon_entropy
from .rng import RandomStream, derive_seed

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}
SPLIT_NAMES = ("train", "val", "test")
MANIFEST_NAME = "manifest.jsonl"
MANIFEST_SCHEMA = 1


class DatasetError(Exception):
    pass


@dataclass(frozen=True)
class SplitSpec:
    """Either ratio-based (e.g. 8:1:1) or a predefined assignment file."""

    ratios: tuple[int, ...] | None = None
    predefined: Path | None = None

    def __post_init__(self):
        if (self.ratios is None) == (self.predefined is None):
            raise ValueError("split needs ratios or a predefined file, not both")
        if self.ratios is not None:
            if len(self.ratios) < 2 or len(self.ratios) > len(SPLIT_NAMES):
                raise ValueError("split ratios take 2 or 3 parts")
            if any(r < 0 for r in self.ratios) or sum(self.ratios) <= 0:
                raise ValueError("split ratios must be non-negative and sum > 0")

    @classmethod
    def parse(cls, text: str) -> "SplitSpec":
        if text.startswith("file="):
            return cls(predefined=Path(text[5:]))
        try:
            ratios = tuple(int(p) for p in text.split(":"))
        except ValueError as e:
            raise ValueError(f"bad split spec {text!r}") from e
        return cls(ratios=ratios)


@dataclass(frozen=True)
class BudgetPolicy:
    """Linear map from image entropy to its total shape allocation."""

    min_shapes: int
    max_shapes: int
    low_h: float
    high_h: float

    def __post_init__(self):
        if self.min_shapes > self.max_shapes:
            raise ValueError("need min_shapes <= max_shapes")
        if not self.low_h < self.high_h:
            raise ValueError("need low_h < high_h")


def entropy_budget(entropy_bits: float, policy: BudgetPolicy) -> int:
    """Shape count for an image of the given entropy; monotone in entropy."""
    t = (entropy_bits - policy.low_h) / (policy.high_h - policy.low_h)
    t = min(1.0, max(0.0, t))
    return int(
        math.floor(policy.min_shapes + t * (policy.max_shapes - policy.min_shapes) + 0.5)
    )


@dataclass(frozen=True)
class DatasetConfig:
    input_root: Path
    output_root: Path
    fit: FitConfig = field(default_factory=FitConfig)
    modes: tuple[int, ...] = (0,)
    split: SplitSpec = field(default_factory=lambda: SplitSpec(ratios=(8, 1, 1)))
    split_seed: int = 0
    resume: bool = False
    budget: BudgetPolicy | None = None
    workers: int = 1

    def __post_init__(self):
        if not self.modes or any(m not in (0, 1) for m in self.modes):
            raise ValueError("modes must be a non-empty subset of {0, 1}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class CellRecord:
    """Outputs and metrics for one (mode, level) of one image."""

    svg: str
    json_path: str
    png: str
    rmse: float
    svg_bytes: int
    png_bytes: int


@dataclass
class ManifestEntry:
    source: str
    class_label: str
    split: str
    entropy: float | None
    source_bytes: int
    failed: bool
    error: str | None
    cells: dict[str, CellRecord]

    def to_json(self) -> str:
        payload: dict = {
            "schema": MANIFEST_SCHEMA,
            "source": self.source,
            "class": self.class_label,
            "split": self.split,
            "entropy": self.entropy,
            "source_bytes": self.source_bytes,
            "failed": self.failed,
            "error": self.error,
            "cells": {
                key: {
                    "svg": c.svg,
                    "json": c.json_path,
                    "png": c.png,
                    "rmse": c.rmse,
                    "svg_bytes": c.svg_bytes,
                    "png_bytes": c.png_bytes,
                }
                for key, c in sorted(self.cells.items())
            },
        }
        return json.dumps(payload, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "ManifestEntry":
        d = json.loads(line)
        if d.get("schema") != MANIFEST_SCHEMA:
            raise DatasetError(f"unsupported manifest schema {d.get('schema')!r}")
        cells = {
            key: CellRecord(
                svg=c["svg"],
                json_path=c["json"],
                png=c["png"],
                rmse=c["rmse"],
                svg_bytes=c["svg_bytes"],
                png_bytes=c["png_bytes"],
            )
            for key, c in d["cells"].items()
        }
        return cls(
            source=d["source"],
            class_label=d["class"],
            split=d["split"],
            entropy=d["entropy"],
            source_bytes=d["source_bytes"],
            failed=d["failed"],
            error=d["error"],
            cells=cells,
        )


def _label_seed(label: str) -> int:
    return int.from_bytes(
        hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest(), "big"
    )


def _largest_remainder(n: int, ratios: tuple[int, ...]) -> list[int]:
    total = sum(ratios)
    floors = [n * r // total for r in ratios]
    rem = n - sum(floors)
    fracs = sorted(
        range(len(ratios)),
        key=lambda i: (-(n * ratios[i] % total), i),
    )
    for i in fracs[:rem]:
        floors[i] += 1
    return floors


def plan_splits(
    images: list[tuple[str, str]],
    split: SplitSpec,
    seed: int,
) -> tuple[dict[str, str], list[str]]:
    """Assign a split name to every (path, class) pair.

    Ratio mode shuffles each class with its own derived stream and cuts by
    largest remainder, so per-class counts are exact to within one image.
    Returns (assignment, warnings).
    """
    if not images:
        raise ValueError("empty image list")
    if split.predefined is not None:
        assignment: dict[str, str] = {}
        for lineno, line in enumerate(
            Path(split.predefined).read_text(encoding="utf-8").splitlines(), 1
        ):
            if not line.strip():
                continue
            try:
                path, name = line.split("\t")
            except ValueError as e:
                raise DatasetError(
                    f"{split.predefined}:{lineno}: expected 'path<TAB>split'"
                ) from e
            assignment[path] = name
        missing = [p for p, _ in images if p not in assignment]
        if missing:
            raise DatasetError(
                f"predefined split missing {len(missing)} images (first: {missing[0]})"
            )
        return {p: assignment[p] for p, _ in images}, []

    ratios = split.ratios
    assert ratios is not None
    names = SPLIT_NAMES[: len(ratios)]
    by_class: dict[str, list[str]] = {}
    for path, label in images:
        by_class.setdefault(label, []).append(path)

    assignment = {}
    warnings: list[str] = []
    for label in sorted(by_class):
        paths = sorted(by_class[label])
        if len(paths) < len(ratios):
            for p in paths:
                assignment[p] = names[0]
            warnings.append(
                f"class {label!r} has {len(paths)} image(s) < {len(ratios)} splits; all to train"
            )
            continue
        rng = RandomStream(derive_seed(seed, _label_seed(label)))
        for i in range(len(paths) - 1, 0, -1):
            j = rng.randint(0, i)
            paths[i], paths[j] = paths[j], paths[i]
        counts = _largest_remainder(len(paths), ratios)
        pos = 0
        for name, cnt in zip(names, counts):
            for p in paths[pos : pos + cnt]:
                assignment[p] = name
            pos += cnt
    return assignment, warnings


def scan_corpus(input_root: Path) -> list[tuple[str, str]]:
    """Enumerate (relative path, class) pairs, sorted for determinism."""
    root = Path(input_root)
    if not root.is_dir():
        raise DatasetError(f"input root {root} is not a directory")
    images: list[tuple[str, str]] = []
    for class_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        for img in sorted(class_dir.iterdir()):
            if img.suffix.lower() in IMAGE_SUFFIXES and img.is_file():
                images.append((f"{class_dir.name}/{img.name}", class_dir.name))
    if not images:
        raise DatasetError(f"no images under {root} (expected root/<class>/<image>)")
    return images


def _image_levels(base: tuple[int, ...], budget_shapes: int | None) -> tuple[int, ...]:
    if budget_shapes is None:
        return base
    kept = [l for l in base if l < budget_shapes]
    return tuple(kept) + (budget_shapes,)


def _cell_key(mode: int, level: int) -> str:
    return f"{mode}/{level}"


def _process_image(
    config: DatasetConfig, rel_path: str, class_label: str, split_name: str
) -> ManifestEntry:
    """Fit one image at all modes/levels and write its outputs."""
    src = Path(config.input_root) / rel_path
    stem = Path(rel_path).stem
    source_bytes = src.stat().st_size if src.exists() else 0
    try:
        img = load_image(src)
        entropy = shannon_entropy(img)
    except Exception as e:
        return ManifestEntry(
            source=rel_path,
            class_label=class_label,
            split=split_name,
            entropy=None,
            source_bytes=source_bytes,
            failed=True,
            error=f"{type(e).__name__}: {e}",
            cells={},
        )

    budget_shapes = (
        entropy_budget(entropy, config.budget) if config.budget is not None else None
    )
    levels = _image_levels(config.fit.checkpoints, budget_shapes)
    image_seed = derive_seed(config.fit.seed, _label_seed(rel_path))

    cells: dict[str, CellRecord] = {}
    for mode in config.modes:
        fit_cfg = replace(
            config.fit,
            mode=mode,
            checkpoints=levels,
            seed=derive_seed(image_seed, mode),
        )
        _, checkpoints, _ = fit(img, fit_cfg)
        for cp in checkpoints:
            out_dir = Path(config.output_root) / str(mode) / str(cp.count) / class_label
            out_dir.mkdir(parents=True, exist_ok=True)
            svg_path = out_dir / f"{stem}.svg"
            json_path = out_dir / f"{stem}.json"
            png_path = out_dir / f"{stem}.png"
            svg_text = emit.emit_svg(cp.document)
            svg_path.write_bytes(svg_text.encode("utf-8"))
            json_path.write_bytes(emit.document_to_json(cp.document).encode("utf-8"))
            png_bytes = save_png(emit.render(cp.document, "original"), png_path)
            rel_out = f"{mode}/{cp.count}/{class_label}/{stem}"
            cells[_cell_key(mode, cp.count)] = CellRecord(
                svg=f"{rel_out}.svg",
                json_path=f"{rel_out}.json",
                png=f"{rel_out}.png",
                rmse=cp.rmse,
                svg_bytes=cp.svg_bytes,
                png_bytes=png_bytes,
            )
    return ManifestEntry(
        source=rel_path,
        class_label=class_label,
        split=split_name,
        entropy=entropy,
        source_bytes=source_bytes,
        failed=False,
        error=None,
        cells=cells,
    )


def _verify_entry(config: DatasetConfig, entry: ManifestEntry) -> bool:
    """A kept resume entry must have all its files on disk at recorded sizes."""
    if entry.failed:
        return True
    for cell in entry.cells.values():
        svg = Path(config.output_root) / cell.svg
        if not svg.is_file() or svg.stat().st_size != cell.svg_bytes:
            return False
        for rel in (cell.json_path, cell.png):
            if not (Path(config.output_root) / rel).is_file():
                return False
    return True


def load_manifest(path: Path) -> list[ManifestEntry]:
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                entries.append(ManifestEntry.from_json(line))
    return entries


def _pool_task(args: tuple) -> ManifestEntry:
    return _process_image(*args)


def build_dataset(config: DatasetConfig, log=None) -> list[ManifestEntry]:
    """Fit the whole corpus; returns the manifest entries in corpus order.

    Entries are appended to the manifest only after every file for that
    image is written, so an interrupted run leaves a clean prefix that
    `resume` continues to the identical final manifest.
    """

    def say(msg: str) -> None:
        if log is not None:
            log(msg)

    images = scan_corpus(config.input_root)
    assignment, warnings = plan_splits(images, config.split, config.split_seed)
    for w in warnings:
        say(f"warning: {w}")

    out_root = Path(config.output_root)
    manifest_path = out_root / MANIFEST_NAME
    done: dict[str, ManifestEntry] = {}
    if manifest_path.exists():
        if not config.resume:
            raise DatasetError(
                f"{manifest_path} already exists; pass resume to continue that run"
            )
        for entry in load_manifest(manifest_path):
            if not _verify_entry(config, entry):
                raise DatasetError(
                    f"manifest entry for {entry.source} does not match files on disk; "
                    "remove the output directory and rerun"
                )
            done[entry.source] = entry
    out_root.mkdir(parents=True, exist_ok=True)

    todo = [
        (config, rel, label, assignment[rel])
        for rel, label in images
        if rel not in done
    ]
    say(f"{len(images)} images, {len(done)} already complete, {len(todo)} to fit")

    results: dict[str, ManifestEntry] = dict(done)
    with open(manifest_path, "a", encoding="utf-8") as mf:

        def record(entry: ManifestEntry) -> None:
            mf.write(entry.to_json() + "\n")
            mf.flush()
            os.fsync(mf.fileno())
            results[entry.source] = entry
            say(f"done {entry.source}" + (" (failed)" if entry.failed else ""))

        if config.workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                for entry in pool.map(_pool_task, todo):
                    record(entry)
        else:
            for args in todo:
                record(_pool_task(args))

    return [results[rel] for rel, _ in images]

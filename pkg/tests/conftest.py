"""Shared fixtures: synthetic photo-like corpora and the heavy desk run.

The desk corpus is 20 deterministic pseudo-natural images (smooth fields,
soft blobs, mild texture) so corpus-scale behavior can be exercised without
shipping real photos. The full default-config run over it is expensive and
therefore session-scoped; acceptance tests share it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from primfit.fitter import CheckpointSet, FitConfig, FitState, StepRecord, fit
from primfit.raster import RasterImage, load_image


def synth_photo(seed: int, w: int, h: int) -> np.ndarray:
    """Smooth low-frequency color field + soft blobs + light grain."""
    rng = np.random.default_rng(seed)
    low = rng.integers(0, 256, (6, 8, 3), np.uint8)
    base = np.asarray(
        Image.fromarray(low).resize((w, h), Image.BILINEAR), np.float64
    )
    yy, xx = np.mgrid[0:h, 0:w]
    for _ in range(rng.integers(2, 5)):
        cx, cy = rng.uniform(0, w), rng.uniform(0, h)
        rx, ry = rng.uniform(w * 0.1, w * 0.4), rng.uniform(h * 0.1, h * 0.4)
        mask = ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 < 1.0
        tint = rng.uniform(0, 255, 3)
        weight = rng.uniform(0.35, 0.8)
        base[mask] = base[mask] * (1 - weight) + tint * weight
    grad = (xx / max(w - 1, 1) * rng.uniform(-40, 40))[..., None]
    base = base + grad + rng.normal(0, 6.0, base.shape)
    return np.clip(base, 0, 255).astype(np.uint8)


def make_corpus(
    root: Path, classes: dict[str, int], size=(96, 80), seed: int = 100
) -> list[Path]:
    """Write root/<class>/img###.png trees; returns the file paths."""
    paths = []
    idx = seed
    for label, count in classes.items():
        d = root / label
        d.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            px = synth_photo(idx, size[0], size[1])
            p = d / f"img{i:03d}.png"
            Image.fromarray(px).save(p)
            paths.append(p)
            idx += 1
    return paths


@pytest.fixture(scope="session")
def desk_corpus(tmp_path_factory) -> list[Path]:
    """20 photo-like PNGs of mixed sizes (down-, up-, and no-scaling cases)."""
    root = tmp_path_factory.mktemp("desk")
    sizes = [(320, 256), (256, 320), (400, 300), (256, 200), (200, 160)]
    paths = []
    for i in range(20):
        w, h = sizes[i % len(sizes)]
        px = synth_photo(1000 + i, w, h)
        p = root / f"photo{i:02d}.png"
        Image.fromarray(px).save(p)
        paths.append(p)
    return paths


@dataclass
class DeskFit:
    path: Path
    state: FitState
    checkpoints: CheckpointSet
    trajectory: list[StepRecord]
    seconds: float


@pytest.fixture(scope="session")
def desk_run(desk_corpus) -> list[DeskFit]:
    """Default-config mode-0 ladder fit of every desk image (heavy)."""
    runs = []
    for i, path in enumerate(desk_corpus):
        img = load_image(path)
        cfg = FitConfig(seed=9000 + i)
        t0 = time.perf_counter()
        state, checkpoints, trajectory = fit(img, cfg)
        dt = time.perf_counter() - t0
        runs.append(DeskFit(path, state, checkpoints, trajectory, dt))
    return runs


@pytest.fixture()
def small_photo() -> RasterImage:
    return RasterImage(synth_photo(7, 64, 48))

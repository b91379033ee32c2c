"""Hill-climb shape search with hierarchical checkpointing.

Each added shape is found by scoring a batch of random candidates, climbing
the best few through single-site mutations, and committing the winner's
optimally colored blend. Candidate evaluation is split across a fixed
number of virtual slots with independently derived random streams; actual
thread count only changes who executes a slot, never the result, so runs
are reproducible for any worker setting.
"""

from __future__ import annotations

import math
from bisect import insort
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import emit, kernels
from .geometry import (
    ALL_KINDS,
    Shape,
    ShapeKind,
    fill_kernel_params,
    kernel_params,
    mutate,
    random_shape,
)
from .raster import (
    Color,
    PlacedShape,
    RasterImage,
    background_color,
    blend_spans_inplace,
    full_sse,
    resize_to_working,
)
from .rng import RandomStream, derive_seed

# Virtual evaluation slots per shape step. Probe draws are partitioned over
# these and each slot gets its own derived stream, which is what makes
# results independent of the executing worker count.
PROBE_SLOTS = 4

# Non-improving proposals are retried this many times before the best seen
# candidate is committed anyway (flagged as a forced step).
ACCEPT_RETRIES = 10

DEFAULT_LEVELS = (10, 30, 50, 100, 500, 1000)


@dataclass(frozen=True)
class FitConfig:
    mode: int = 0
    checkpoints: tuple[int, ...] = DEFAULT_LEVELS
    alpha: int = 128
    probes: int = 1000
    climbers: int = 4
    max_age: int = 100
    working_size: int = 256
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.mode not in (0, 1):
            raise ValueError("mode must be 0 (all kinds) or 1 (triangles)")
        cps = tuple(self.checkpoints)
        if not cps or any(b <= a for a, b in zip(cps, cps[1:])) or cps[0] < 1:
            raise ValueError("checkpoints must be a strictly increasing positive list")
        object.__setattr__(self, "checkpoints", cps)
        if not 1 <= self.alpha <= 255:
            raise ValueError("alpha must be in [1, 255]")
        if not self.probes >= self.climbers >= 1:
            raise ValueError("need probes >= climbers >= 1")
        if self.max_age < 1:
            raise ValueError("max_age must be >= 1")
        if self.working_size < 1:
            raise ValueError("working_size must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def total_shapes(self) -> int:
        return self.checkpoints[-1]


@dataclass
class FitState:
    """Owned by one fit: working target, evolving canvas, running score."""

    target: RasterImage
    canvas: RasterImage
    placed: list[PlacedShape]
    sse: int
    background: Color
    original_size: tuple[int, int]

    @property
    def rmse(self) -> float:
        return math.sqrt(self.sse / (self.target.w * self.target.h * 3))

    def document(self) -> emit.ShapeListDocument:
        w0, h0 = self.original_size
        return emit.ShapeListDocument(
            w0=w0,
            h0=h0,
            w=self.target.w,
            h=self.target.h,
            bg=self.background,
            shapes=tuple(self.placed),
        )


@dataclass(frozen=True)
class Checkpoint:
    count: int
    rmse: float
    svg_bytes: int
    document: emit.ShapeListDocument


@dataclass(frozen=True)
class CheckpointSet:
    levels: tuple[Checkpoint, ...]

    def __iter__(self):
        return iter(self.levels)

    def __len__(self) -> int:
        return len(self.levels)

    def by_count(self) -> dict[int, Checkpoint]:
        return {c.count: c for c in self.levels}


@dataclass(frozen=True)
class StepRecord:
    step: int
    sse: int
    rmse: float
    forced: bool


@dataclass(frozen=True)
class _Candidate:
    """Evaluated shape: its optimal color, SSE delta, and tie-break rank."""

    delta: int
    empty: bool
    rank: tuple[int, ...]
    shape: Shape
    color: Color

    @property
    def key(self) -> tuple:
        # Lower SSE wins; empty coverage loses ties; then slot/probe order.
        return (self.delta, self.empty, self.rank)


def init_state(target: RasterImage, config: FitConfig) -> FitState:
    """Resize to working resolution and start from the mean-color canvas."""
    work = resize_to_working(target, config.working_size)
    bg = background_color(work)
    canvas = RasterImage.filled(work.w, work.h, bg)
    sse = full_sse(work, canvas).sse
    return FitState(
        target=work,
        canvas=canvas,
        placed=[],
        sse=sse,
        background=bg,
        original_size=(target.w, target.h),
    )


def _draw_shape(mode: int, bounds: tuple[int, int], rng: RandomStream) -> Shape:
    if mode == 1:
        return random_shape(ShapeKind.TRIANGLE, bounds, rng)
    return random_shape(ALL_KINDS[rng.randint(0, 5)], bounds, rng)


# Hot-path candidate entries are plain tuples
# (delta, empty, slot, probe_index, shape, r, g, b); the leading four ints
# are unique per entry so tuple comparison realizes the merge total order
# (lowest delta, non-empty beats empty on ties, then slot, then probe).


def _probe_slot(
    state: FitState, config: FitConfig, rng: RandomStream, slot: int, count: int
) -> list[tuple]:
    """Evaluate one slot's probe share; returns its `climbers` best."""
    bounds = (state.target.w, state.target.h)
    tpx, cpx = state.target.px, state.canvas.px
    alpha = config.alpha
    p = np.zeros(8, np.float64)
    top: list[tuple] = []
    for j in range(count):
        shape = _draw_shape(config.mode, bounds, rng)
        geom = fill_kernel_params(shape, p)
        delta, r, g, b, n = kernels.eval_shape(geom, p, tpx, cpx, alpha)
        insort(top, (delta, 1 if n == 0 else 0, slot, j, shape, r, g, b))
        if len(top) > config.climbers:
            top.pop()
    return top


def _climb(
    state: FitState, config: FitConfig, start: tuple, rng: RandomStream
) -> tuple:
    """Mutate while improvements land, stop after max_age straight misses."""
    bounds = (state.target.w, state.target.h)
    tpx, cpx = state.target.px, state.canvas.px
    alpha = config.alpha
    delta, empty, slot, j, shape, r, g, b = start
    p = np.zeros(8, np.float64)
    age = 0
    while age < config.max_age:
        cand = mutate(shape, bounds, rng)
        geom = fill_kernel_params(cand, p)
        d2, r2, g2, b2, n2 = kernels.eval_shape(geom, p, tpx, cpx, alpha)
        e2 = 1 if n2 == 0 else 0
        if (d2, e2) < (delta, empty):
            delta, empty, shape, r, g, b = d2, e2, cand, r2, g2, b2
            age = 0
        else:
            age += 1
    return (delta, empty, slot, j, shape, r, g, b)


def _search(state: FitState, config: FitConfig, rng: RandomStream) -> _Candidate:
    """One full proposal round: probe batch, top-k selection, climbs."""
    slots = PROBE_SLOTS
    share = [config.probes // slots] * slots
    for v in range(config.probes % slots):
        share[v] += 1
    slot_rngs = [rng.spawn(v) for v in range(slots)]

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=min(config.workers, slots)) as pool:
            per_slot = list(
                pool.map(
                    lambda v: _probe_slot(state, config, slot_rngs[v], v, share[v]),
                    range(slots),
                )
            )
    else:
        per_slot = [
            _probe_slot(state, config, slot_rngs[v], v, share[v]) for v in range(slots)
        ]

    seeds = sorted(c for part in per_slot for c in part)[: config.climbers]

    climb_rngs = [rng.spawn(slots + c) for c in range(len(seeds))]
    if config.workers > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=min(config.workers, len(seeds))) as pool:
            climbed = list(
                pool.map(
                    lambda c: _climb(state, config, seeds[c], climb_rngs[c]),
                    range(len(seeds)),
                )
            )
    else:
        climbed = [_climb(state, config, seeds[c], climb_rngs[c]) for c in range(len(seeds))]

    best = climbed[0]
    for c in climbed[1:]:
        if (c[0], c[1]) < (best[0], best[1]):
            best = c
    delta, empty, slot, j, shape, r, g, b = best
    return _Candidate(
        int(delta), bool(empty), (slot, j), shape, Color(int(r), int(g), int(b), config.alpha)
    )


def propose_shape(state: FitState, config: FitConfig, rng: RandomStream) -> PlacedShape:
    """Best candidate of one proposal round, with its optimal color."""
    cand = _search(state, config, rng)
    return PlacedShape(cand.shape, cand.color)


def _apply(state: FitState, shape: Shape, color: Color) -> int:
    """Blend the shape into the canvas and append it; returns its delta."""
    geom, p = kernel_params(shape)
    ys, x1, x2 = kernels.raster_spans(geom, p, state.canvas.w, state.canvas.h)
    delta = int(
        kernels.sse_delta(
            ys, x1, x2, state.target.px, state.canvas.px,
            color.r, color.g, color.b, color.a,
        )
    )
    kernels.blend_inplace(ys, x1, x2, state.canvas.px, color.r, color.g, color.b, color.a)
    state.placed.append(PlacedShape(shape, color))
    state.sse += delta
    return delta


def accept(
    state: FitState, candidate: PlacedShape, config: FitConfig
) -> tuple[FitState, bool]:
    """Require-improvement policy for a single candidate.

    Commits the candidate (mutating the state) iff its delta is negative;
    returns (state, accepted). The retry-then-force loop around repeated
    proposals lives in fit().
    """
    geom, p = kernel_params(candidate.shape)
    ys, x1, x2 = kernels.raster_spans(geom, p, state.canvas.w, state.canvas.h)
    color = candidate.color
    delta = int(
        kernels.sse_delta(
            ys, x1, x2, state.target.px, state.canvas.px,
            color.r, color.g, color.b, color.a,
        )
    )
    if delta >= 0:
        return state, False
    kernels.blend_inplace(ys, x1, x2, state.canvas.px, color.r, color.g, color.b, color.a)
    state.placed.append(PlacedShape(candidate.shape, color))
    state.sse += delta
    return state, True


def fit(
    target: RasterImage,
    config: FitConfig,
    progress=None,
) -> tuple[FitState, CheckpointSet, list[StepRecord]]:
    """Run the accept loop to the last checkpoint level.

    Snapshots a checkpoint exactly when the placed count hits each
    configured level; the trajectory records every accepted step. `progress`
    (optional) is called as progress(step, total) after each accepted shape.
    """
    state = init_state(target, config)
    level_set = set(config.checkpoints)
    total = config.total_shapes
    trajectory: list[StepRecord] = []
    checkpoints: list[Checkpoint] = []
    attempt_counter = 0

    for step in range(1, total + 1):
        best: _Candidate | None = None
        forced = True
        for _ in range(1 + ACCEPT_RETRIES):
            rng = RandomStream(derive_seed(config.seed, attempt_counter))
            attempt_counter += 1
            cand = _search(state, config, rng)
            if best is None or cand.key < best.key:
                best = cand
            if cand.delta < 0:
                best = cand
                forced = False
                break
        assert best is not None
        _apply(state, best.shape, best.color)
        trajectory.append(StepRecord(step, state.sse, state.rmse, forced))
        if step in level_set:
            doc = state.document()
            svg = emit.emit_svg(doc)
            checkpoints.append(
                Checkpoint(step, state.rmse, len(svg.encode("utf-8")), doc)
            )
        if progress is not None:
            progress(step, total)

    return state, CheckpointSet(tuple(checkpoints)), trajectory

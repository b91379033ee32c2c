"""Corpus-level statistics: entropy grouping and per-level summaries.

Mirrors the generation-side analysis workflow at desk scale: sample the
manifest, order by entropy, cut into near-equal groups, and report how
reconstruction error and file size move across the entropy range. RMSE is
the fidelity column throughout (no neural perceptual metrics here).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .dataset import ManifestEntry
from .rng import RandomStream


@dataclass(frozen=True)
class GroupStat:
    index: int
    count: int
    mean_entropy: float
    levels: dict[str, tuple[float, float]]  # key -> (mean rmse, mean svg bytes)


@dataclass(frozen=True)
class EntropyGroupReport:
    groups: tuple[GroupStat, ...]
    spearman: dict[str, float]  # per level key: rank corr of group index vs mean rmse
    sample_size: int
    seed: int

    def to_json(self) -> str:
        payload = {
            "sample_size": self.sample_size,
            "seed": self.seed,
            "groups": [
                {
                    "index": g.index,
                    "count": g.count,
                    "mean_entropy": g.mean_entropy,
                    "levels": {
                        k: {"mean_rmse": v[0], "mean_svg_bytes": v[1]}
                        for k, v in sorted(g.levels.items())
                    },
                }
                for g in self.groups
            ],
            "spearman_group_vs_rmse": dict(sorted(self.spearman.items())),
        }
        return json.dumps(payload, separators=(",", ":"), sort_keys=False) + "\n"

    def text_table(self) -> str:
        keys = sorted({k for g in self.groups for k in g.levels})
        header = ["group", "count", "entropy"] + [f"rmse[{k}]" for k in keys] + [
            f"svgB[{k}]" for k in keys
        ]
        rows = [header]
        for g in self.groups:
            row = [str(g.index), str(g.count), f"{g.mean_entropy:.4f}"]
            row += [
                f"{g.levels[k][0]:.4f}" if k in g.levels else "-" for k in keys
            ]
            row += [
                f"{g.levels[k][1]:.1f}" if k in g.levels else "-" for k in keys
            ]
            rows.append(row)
        rows.append(
            ["spearman", "", ""]
            + [f"{self.spearman.get(k, float('nan')):+.4f}" for k in keys]
            + ["" for _ in keys]
        )
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        return "\n".join(
            "  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rows
        )

    def to_csv(self) -> str:
        keys = sorted({k for g in self.groups for k in g.levels})
        lines = [
            ",".join(
                ["group", "count", "mean_entropy"]
                + [f"mean_rmse_{k}" for k in keys]
                + [f"mean_svg_bytes_{k}" for k in keys]
            )
        ]
        for g in self.groups:
            cells = [str(g.index), str(g.count), repr(g.mean_entropy)]
            cells += [repr(g.levels[k][0]) if k in g.levels else "" for k in keys]
            cells += [repr(g.levels[k][1]) if k in g.levels else "" for k in keys]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _rank(values: list[float]) -> list[float]:
    """Average ranks (1-based), ties sharing their mean rank."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def spearman(xs: list[float], ys: list[float]) -> float:
    """Spearman rank correlation (Pearson over average ranks)."""
    if len(xs) != len(ys) or len(xs) < 2:
        raise ValueError("need two equal-length series of at least 2 points")
    rx = _rank(xs)
    ry = _rank(ys)
    n = len(xs)
    mx = sum(rx) / n
    my = sum(ry) / n
    cov = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    vx = sum((a - mx) ** 2 for a in rx)
    vy = sum((b - my) ** 2 for b in ry)
    if vx == 0.0 or vy == 0.0:
        return 0.0
    return cov / (vx * vy) ** 0.5


def entropy_group_analysis(
    entries: list[ManifestEntry],
    sample_size: int | None = None,
    groups: int = 20,
    seed: int = 0,
) -> EntropyGroupReport:
    """Sample, sort by entropy, cut into near-equal groups, aggregate means.

    Ties in entropy break by source path so reruns with one seed reproduce
    the report byte-identically.
    """
    usable = [e for e in entries if not e.failed and e.entropy is not None and e.cells]
    if len(usable) < groups:
        raise ValueError(
            f"need at least {groups} usable manifest entries, have {len(usable)}"
        )
    if sample_size is None or sample_size >= len(usable):
        sample = list(usable)
    else:
        if sample_size < groups:
            raise ValueError("sample_size smaller than group count")
        pool = list(usable)
        rng = RandomStream(seed)
        for i in range(len(pool) - 1, 0, -1):
            j = rng.randint(0, i)
            pool[i], pool[j] = pool[j], pool[i]
        sample = pool[:sample_size]
    sample.sort(key=lambda e: (e.entropy, e.source))

    n = len(sample)
    base, extra = divmod(n, groups)
    stats: list[GroupStat] = []
    pos = 0
    for gi in range(groups):
        size = base + (1 if gi < extra else 0)
        members = sample[pos : pos + size]
        pos += size
        keys = sorted({k for m in members for k in m.cells})
        levels = {}
        for k in keys:
            having = [m for m in members if k in m.cells]
            levels[k] = (
                sum(m.cells[k].rmse for m in having) / len(having),
                sum(m.cells[k].svg_bytes for m in having) / len(having),
            )
        stats.append(
            GroupStat(
                index=gi,
                count=size,
                mean_entropy=sum(m.entropy for m in members) / len(members),
                levels=levels,
            )
        )

    corr = {}
    all_keys = sorted({k for g in stats for k in g.levels})
    for k in all_keys:
        pts = [(g.index, g.levels[k][0]) for g in stats if k in g.levels]
        if len(pts) >= 2:
            corr[k] = spearman([float(i) for i, _ in pts], [r for _, r in pts])
    return EntropyGroupReport(
        groups=tuple(stats), spearman=corr, sample_size=n, seed=seed
    )


@dataclass(frozen=True)
class LevelStat:
    count: int
    mean_rmse: float
    mean_svg_bytes: float
    mean_png_bytes: float
    mean_svg_to_source_ratio: float


@dataclass(frozen=True)
class LevelSummary:
    levels: dict[str, LevelStat]  # key "mode/level"
    mode_bytes_ratio: dict[str, float]  # per level: mode-1 / mode-0 mean svg bytes

    def to_json(self) -> str:
        payload = {
            "levels": {
                k: {
                    "count": s.count,
                    "mean_rmse": s.mean_rmse,
                    "mean_svg_bytes": s.mean_svg_bytes,
                    "mean_png_bytes": s.mean_png_bytes,
                    "mean_svg_to_source_ratio": s.mean_svg_to_source_ratio,
                }
                for k, s in sorted(self.levels.items())
            },
            "mode1_to_mode0_svg_bytes": dict(sorted(self.mode_bytes_ratio.items())),
        }
        return json.dumps(payload, separators=(",", ":")) + "\n"

    def text_table(self) -> str:
        rows = [["mode/level", "count", "rmse", "svg_bytes", "png_bytes", "svg/source"]]
        for k, s in sorted(self.levels.items(), key=_level_sort_key):
            rows.append(
                [
                    k,
                    str(s.count),
                    f"{s.mean_rmse:.4f}",
                    f"{s.mean_svg_bytes:.1f}",
                    f"{s.mean_png_bytes:.1f}",
                    f"{s.mean_svg_to_source_ratio:.3f}",
                ]
            )
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        out = "\n".join(
            "  ".join(cell.rjust(w) for cell, w in zip(r, widths)) for r in rows
        )
        if self.mode_bytes_ratio:
            ratios = "  ".join(
                f"L{lvl}: {v:.3f}" for lvl, v in sorted(self.mode_bytes_ratio.items())
            )
            out += f"\nmode-1/mode-0 svg bytes  {ratios}"
        return out


def _level_sort_key(item: tuple[str, object]) -> tuple[int, int]:
    mode, level = item[0].split("/")
    return (int(mode), int(level))


def level_summary(entries: list[ManifestEntry]) -> LevelSummary:
    """Per-(mode, level) means over all non-failed manifest entries."""
    usable = [e for e in entries if not e.failed and e.cells]
    if not usable:
        raise ValueError("manifest has no usable entries")
    acc: dict[str, list[tuple[float, int, int, float]]] = {}
    for e in usable:
        for k, c in e.cells.items():
            ratio = c.svg_bytes / e.source_bytes if e.source_bytes else 0.0
            acc.setdefault(k, []).append((c.rmse, c.svg_bytes, c.png_bytes, ratio))
    levels = {}
    for k, rows in acc.items():
        n = len(rows)
        levels[k] = LevelStat(
            count=n,
            mean_rmse=sum(r[0] for r in rows) / n,
            mean_svg_bytes=sum(r[1] for r in rows) / n,
            mean_png_bytes=sum(r[2] for r in rows) / n,
            mean_svg_to_source_ratio=sum(r[3] for r in rows) / n,
        )
    ratio = {}
    for k, stat in levels.items():
        mode, level = k.split("/")
        if mode == "1" and f"0/{level}" in levels:
            base = levels[f"0/{level}"].mean_svg_bytes
            if base > 0:
                ratio[level] = stat.mean_svg_bytes / base
    return LevelSummary(levels=levels, mode_bytes_ratio=ratio)

"""Command-line entry point: fit, dataset, analyze, render, size.

Configuration precedence is flags > config file > defaults; every fit or
dataset run dumps its fully resolved configuration into the output
directory so runs can be audited and replayed. Progress goes to stderr,
machine-readable output to stdout or files. Exit codes: 0 success,
1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import analyze, emit
from .dataset import (
    BudgetPolicy,
    DatasetConfig,
    DatasetError,
    SplitSpec,
    build_dataset,
    load_manifest,
)
from .fitter import DEFAULT_LEVELS, FitConfig, fit

ENV_WORKERS = "PRIMFIT_WORKERS"
RESOLVED_CONFIG_NAME = "run-config.txt"


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _parse_levels(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError as e:
        raise ValueError(f"bad levels list {text!r}") from e


def _parse_modes(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(","))
    except ValueError as e:
        raise ValueError(f"bad modes list {text!r}") from e


def _parse_budget(text: str) -> BudgetPolicy:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(
            f"budget policy is 'min_shapes,max_shapes,low_H,high_H', got {text!r}"
        )
    return BudgetPolicy(int(parts[0]), int(parts[1]), float(parts[2]), float(parts[3]))


def _load_config_file(path: str | None) -> dict[str, str]:
    """key = value lines; blank lines and # comments ignored."""
    if path is None:
        return {}
    cfg: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        cfg[key.strip()] = value.strip()
    return cfg


class _Resolver:
    """flags > config file > defaults, remembering what was resolved."""

    def __init__(self, args: argparse.Namespace, file_cfg: dict[str, str]):
        self.args = args
        self.file_cfg = file_cfg
        self.resolved: dict[str, object] = {}

    def get(self, key: str, default, cast=str):
        flag = getattr(self.args, key.replace("-", "_"), None)
        if flag is not None:
            value = flag
        elif key in self.file_cfg:
            value = cast(self.file_cfg[key])
        else:
            value = default
        self.resolved[key] = value
        return value

    def dump(self, out_dir: Path) -> None:
        lines = []
        for key in sorted(self.resolved):
            v = self.resolved[key]
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            lines.append(f"{key} = {v}")
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / RESOLVED_CONFIG_NAME).write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )


def _default_workers() -> int:
    return int(os.environ.get(ENV_WORKERS, "1"))


def _fit_config(r: _Resolver, workers_default: int | None = None) -> FitConfig:
    return FitConfig(
        mode=r.get("mode", 0, int),
        checkpoints=r.get("levels", DEFAULT_LEVELS, _parse_levels),
        alpha=r.get("alpha", 128, int),
        probes=r.get("probes", 1000, int),
        climbers=r.get("climbers", 4, int),
        max_age=r.get("max-age", 100, int),
        working_size=r.get("working-size", 256, int),
        seed=r.get("seed", 0, int),
        workers=(
            workers_default
            if workers_default is not None
            else r.get("workers", _default_workers(), int)
        ),
    )


def cmd_fit(args: argparse.Namespace) -> int:
    r = _Resolver(args, _load_config_file(args.config))
    cfg = _fit_config(r)
    image_path = Path(args.image)
    out_dir = Path(args.out) if args.out else Path(f"{image_path.stem}.primfit")
    r.resolved["out"] = str(out_dir)
    trace = bool(args.trace)

    from .raster import load_image, save_png

    img = load_image(image_path)
    out_dir.mkdir(parents=True, exist_ok=True)
    r.dump(out_dir)

    level_marks = set(cfg.checkpoints)

    def progress(step: int, total: int) -> None:
        if step in level_marks or step == total:
            _say(f"{image_path.name}: {step}/{total} shapes")

    state, checkpoints, trajectory = fit(img, cfg, progress=progress)

    summary: dict = {"image": str(image_path), "levels": {}}
    stem = image_path.stem
    for cp in checkpoints:
        svg_path = out_dir / f"{stem}_{cp.count}.svg"
        json_path = out_dir / f"{stem}_{cp.count}.json"
        png_path = out_dir / f"{stem}_{cp.count}.png"
        svg_path.write_bytes(emit.emit_svg(cp.document).encode("utf-8"))
        json_path.write_bytes(emit.document_to_json(cp.document).encode("utf-8"))
        save_png(emit.render(cp.document, "original"), png_path)
        summary["levels"][str(cp.count)] = {
            "rmse": cp.rmse,
            "svg_bytes": cp.svg_bytes,
            "svg": str(svg_path),
            "json": str(json_path),
            "png": str(png_path),
        }
    if trace:
        trace_path = out_dir / f"{stem}_trace.jsonl"
        with open(trace_path, "w", encoding="utf-8") as f:
            for rec in trajectory:
                f.write(
                    json.dumps(
                        {
                            "step": rec.step,
                            "sse": rec.sse,
                            "rmse": rec.rmse,
                            "forced": rec.forced,
                        },
                        separators=(",", ":"),
                    )
                    + "\n"
                )
        summary["trace"] = str(trace_path)
    print(json.dumps(summary, separators=(",", ":")))
    return 0


def cmd_dataset(args: argparse.Namespace) -> int:
    r = _Resolver(args, _load_config_file(args.config))
    workers = r.get("workers", _default_workers(), int)
    fit_cfg = _fit_config(r, workers_default=1)
    split = SplitSpec.parse(r.get("split", "8:1:1"))
    budget_raw = r.get("budget-policy", None)
    budget = _parse_budget(budget_raw) if budget_raw else None
    out_root = Path(args.out) if args.out else Path(args.root).with_suffix(".primfit")
    r.resolved["out"] = str(out_root)
    cfg = DatasetConfig(
        input_root=Path(args.root),
        output_root=out_root,
        fit=fit_cfg,
        modes=r.get("modes", (0,), _parse_modes),
        split=split,
        split_seed=r.get("split-seed", 0, int),
        resume=bool(args.resume),
        budget=budget,
        workers=workers,
    )
    out_root.mkdir(parents=True, exist_ok=True)
    r.dump(out_root)
    entries = build_dataset(cfg, log=_say)
    failed = sum(1 for e in entries if e.failed)
    print(
        json.dumps(
            {
                "manifest": str(out_root / "manifest.jsonl"),
                "images": len(entries),
                "failed": failed,
            },
            separators=(",", ":"),
        )
    )
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    entries = load_manifest(Path(args.manifest))
    report = analyze.entropy_group_analysis(
        entries, sample_size=args.sample, groups=args.groups, seed=args.seed
    )
    summary = analyze.level_summary(entries)
    sys.stdout.write(report.to_json())
    sys.stdout.write(summary.to_json())
    print(report.text_table())
    print()
    print(summary.text_table())
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
        _say(f"wrote {args.csv}")
    if args.json_out:
        Path(args.json_out).write_text(
            report.to_json() + summary.to_json(), encoding="utf-8"
        )
        _say(f"wrote {args.json_out}")
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    from .raster import save_png

    doc = emit.document_from_json(Path(args.document).read_text(encoding="utf-8"))
    img = emit.render(doc, args.scale)
    out = Path(args.out) if args.out else Path(args.document).with_suffix(".png")
    save_png(img, out)
    print(json.dumps({"png": str(out), "w": img.w, "h": img.h}, separators=(",", ":")))
    return 0


def cmd_size(args: argparse.Namespace) -> int:
    doc = emit.document_from_json(Path(args.document).read_text(encoding="utf-8"))
    rep = emit.size_report(doc)
    print(
        json.dumps(
            {
                "svg_bytes": rep.svg_bytes,
                "minified_bytes": rep.minified_bytes,
                "png_bytes": rep.png_bytes,
                "per_kind_mean_element_bytes": rep.per_kind_mean_element_bytes,
            },
            separators=(",", ":"),
        )
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="primfit",
        description="Approximate raster images with layered primitive shapes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_fit_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--levels", type=_parse_levels, help="checkpoint shape counts, e.g. 10,30,50")
        p.add_argument("--mode", type=int, choices=(0, 1), help="0 = all shapes, 1 = triangles")
        p.add_argument("--alpha", type=int, help="fill opacity 1..255 (default 128)")
        p.add_argument("--probes", type=int, help="random candidates per shape (default 1000)")
        p.add_argument("--climbers", type=int, help="candidates climbed per shape (default 4)")
        p.add_argument("--max-age", type=int, help="climb stops after this many misses (default 100)")
        p.add_argument("--working-size", type=int, help="fitting resolution cap (default 256)")
        p.add_argument("--seed", type=int, help="base random seed (default 0)")
        p.add_argument("--workers", type=int, help=f"parallelism (default ${ENV_WORKERS} or 1)")
        p.add_argument("--config", help="key=value config file (flags win)")
        p.add_argument("-o", "--out", help="output directory")

    p_fit = sub.add_parser("fit", help="fit one image, write per-level svg/json/png")
    p_fit.add_argument("image")
    add_fit_flags(p_fit)
    p_fit.add_argument("--trace", action="store_true", help="write per-step rmse trace")
    p_fit.set_defaults(func=cmd_fit)

    p_ds = sub.add_parser("dataset", help="fit a class-structured corpus with a manifest")
    p_ds.add_argument("root", help="input tree root/<class>/<image>")
    add_fit_flags(p_ds)
    p_ds.add_argument("--modes", type=_parse_modes, help="generation modes, e.g. 0,1")
    p_ds.add_argument("--split", help="8:1:1, 9:1, or file=PATH (default 8:1:1)")
    p_ds.add_argument("--split-seed", type=int, help="seed for split shuffling")
    p_ds.add_argument("--resume", action="store_true", help="continue an interrupted run")
    p_ds.add_argument(
        "--budget-policy",
        help="entropy-adaptive allocation: min_shapes,max_shapes,low_H,high_H",
    )
    p_ds.set_defaults(func=cmd_dataset)

    p_an = sub.add_parser("analyze", help="entropy grouping and level summary of a manifest")
    p_an.add_argument("manifest")
    p_an.add_argument("--groups", type=int, default=20)
    p_an.add_argument("--sample", type=int, default=None, help="sample size (default: all)")
    p_an.add_argument("--seed", type=int, default=0)
    p_an.add_argument("--csv", help="write the group table as CSV here")
    p_an.add_argument("--json-out", help="write the JSON report here")
    p_an.set_defaults(func=cmd_analyze)

    p_re = sub.add_parser("render", help="shape-list JSON to PNG")
    p_re.add_argument("document")
    p_re.add_argument("--scale", choices=("working", "original"), default="working")
    p_re.add_argument("-o", "--out")
    p_re.set_defaults(func=cmd_render)

    p_sz = sub.add_parser("size", help="serialization byte counts of a document")
    p_sz.add_argument("document")
    p_sz.set_defaults(func=cmd_size)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, DatasetError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""CLI contract: flags, exit codes, config precedence, reproducibility."""

from __future__ import annotations

import json
from pathlib import Path

import pytest
from PIL import Image

from primfit.cli import main
from primfit.dataset import CellRecord, ManifestEntry

from conftest import make_corpus, synth_photo

FAST_FLAGS = [
    "--probes", "10", "--climbers", "2", "--max-age", "3", "--working-size", "24",
]


@pytest.fixture()
def photo(tmp_path) -> Path:
    p = tmp_path / "photo.png"
    Image.fromarray(synth_photo(5, 40, 30)).save(p)
    return p


def test_fit_flag_contract_mode1(photo, tmp_path, capsys):
    out = tmp_path / "out"
    rc = main([
        "fit", str(photo), "--levels", "3,5", "--mode", "1", "--seed", "7",
        "-o", str(out), *FAST_FLAGS,
    ])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert set(summary["levels"]) == {"3", "5"}
    for level, n in (("3", 3), ("5", 5)):
        svg = Path(summary["levels"][level]["svg"]).read_text()
        assert svg.count("<polygon") == n  # triangles only in mode 1
        assert svg.count("<ellipse") == svg.count("<circle") == 0
        assert Path(summary["levels"][level]["json"]).is_file()
        assert Path(summary["levels"][level]["png"]).is_file()
    assert (out / "run-config.txt").is_file()


def test_fit_repeat_is_byte_identical(photo, tmp_path, capsys):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = main([
            "fit", str(photo), "--levels", "4", "--seed", "3", "-o", str(out),
            *FAST_FLAGS,
        ])
        assert rc == 0
        capsys.readouterr()
        outs.append((out / "photo_4.svg").read_bytes())
    assert outs[0] == outs[1]


def test_fit_trace_written(photo, tmp_path, capsys):
    out = tmp_path / "out"
    rc = main([
        "fit", str(photo), "--levels", "4", "--seed", "3", "-o", str(out),
        "--trace", *FAST_FLAGS,
    ])
    assert rc == 0
    capsys.readouterr()
    lines = (out / "photo_trace.jsonl").read_text().splitlines()
    assert len(lines) == 4
    for i, line in enumerate(lines, 1):
        rec = json.loads(line)
        assert rec["step"] == i
        assert set(rec) == {"step", "sse", "rmse", "forced"}


def test_config_file_precedence(photo, tmp_path, capsys):
    cfg = tmp_path / "cfg.txt"
    cfg.write_text("levels = 3\nseed = 5\nprobes = 10\nclimbers = 2\n"
                   "max-age = 3\nworking-size = 24\n# comment\n")
    out = tmp_path / "out"
    rc = main(["fit", str(photo), "--config", str(cfg), "--seed", "9", "-o", str(out)])
    assert rc == 0
    capsys.readouterr()
    resolved = (out / "run-config.txt").read_text()
    assert "seed = 9" in resolved  # flag beats file
    assert "levels = 3" in resolved  # file beats default
    assert "probes = 10" in resolved


def test_usage_error_exit_2(capsys):
    with pytest.raises(SystemExit) as e:
        main(["fit", "img.png", "--mode", "9"])
    assert e.value.code == 2


def test_missing_image_exit_1(tmp_path, capsys):
    rc = main(["fit", str(tmp_path / "nope.png"), "--levels", "3", *FAST_FLAGS])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_dataset_cli_split_names(tmp_path, capsys):
    root = tmp_path / "in"
    make_corpus(root, {"a": 10, "b": 10}, size=(24, 20))
    out = tmp_path / "out"
    rc = main([
        "dataset", str(root), "-o", str(out), "--levels", "3", "--split", "8:1:1",
        "--seed", "2", *FAST_FLAGS,
    ])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["images"] == 20 and summary["failed"] == 0
    manifest = Path(summary["manifest"]).read_text().splitlines()
    splits = [json.loads(line)["split"] for line in manifest]
    assert set(splits) == {"train", "val", "test"}
    assert splits.count("train") == 16  # 8 per class of 10
    assert (out / "run-config.txt").is_file()


def test_dataset_cli_9_1_two_names(tmp_path, capsys):
    root = tmp_path / "in"
    make_corpus(root, {"a": 10}, size=(24, 20))
    out = tmp_path / "out"
    rc = main([
        "dataset", str(root), "-o", str(out), "--levels", "3,5", "--split", "9:1",
        *FAST_FLAGS,
    ])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    splits = [
        json.loads(line)["split"]
        for line in Path(summary["manifest"]).read_text().splitlines()
    ]
    assert set(splits) == {"train", "val"}
    assert splits.count("train") == 9


def _write_manifest(path: Path, n: int = 40) -> None:
    with open(path, "w") as f:
        for i in range(n):
            entry = ManifestEntry(
                source=f"c/img{i:03d}.png", class_label="c", split="train",
                entropy=1.0 + 0.1 * i, source_bytes=1000, failed=False, error=None,
                cells={"0/10": CellRecord("a.svg", "a.json", "a.png",
                                          40.0 - 0.3 * i, 500 + i, 800)},
            )
            f.write(entry.to_json() + "\n")


def test_analyze_cli_twenty_groups(tmp_path, capsys):
    manifest = tmp_path / "manifest.jsonl"
    _write_manifest(manifest)
    csv_path = tmp_path / "groups.csv"
    rc = main(["analyze", str(manifest), "--groups", "20", "--csv", str(csv_path)])
    assert rc == 0
    out = capsys.readouterr().out
    lines = out.splitlines()
    header = next(i for i, l in enumerate(lines) if l.lstrip().startswith("group"))
    footer = next(i for i, l in enumerate(lines) if l.lstrip().startswith("spearman"))
    assert footer - header - 1 == 20  # exactly 20 group rows
    assert csv_path.read_text().count("\n") == 21  # header + 20 rows
    first = json.loads(lines[0])
    assert len(first["groups"]) == 20


def test_analyze_cli_malformed_manifest_exit_1(tmp_path, capsys):
    bad = tmp_path / "manifest.jsonl"
    bad.write_text('{"schema":99}\n')
    rc = main(["analyze", str(bad)])
    assert rc == 1


def test_render_cli_original_scale(photo, tmp_path, capsys):
    out = tmp_path / "out"
    rc = main([
        "fit", str(photo), "--levels", "3", "--seed", "1", "-o", str(out), *FAST_FLAGS,
    ])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    doc = summary["levels"]["3"]["json"]
    png = tmp_path / "r.png"
    rc = main(["render", doc, "--scale", "original", "-o", str(png)])
    assert rc == 0
    info = json.loads(capsys.readouterr().out)
    assert (info["w"], info["h"]) == (40, 30)  # source dimensions
    with Image.open(png) as im:
        assert im.size == (40, 30)


def test_size_cli_reports_counts(photo, tmp_path, capsys):
    out = tmp_path / "out"
    main(["fit", str(photo), "--levels", "3", "--seed", "1", "-o", str(out), *FAST_FLAGS])
    summary = json.loads(capsys.readouterr().out)
    rc = main(["size", summary["levels"]["3"]["json"]])
    assert rc == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["svg_bytes"] > 0
    assert 0 < rep["minified_bytes"] <= rep["svg_bytes"]
    assert rep["png_bytes"] > 0
    assert all(v > 0 for v in rep["per_kind_mean_element_bytes"].values())


def test_size_cli_malformed_document_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["size", str(bad)]) == 1


def test_workers_env_default(photo, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("PRIMFIT_WORKERS", "2")
    out = tmp_path / "out"
    rc = main(["fit", str(photo), "--levels", "3", "--seed", "1", "-o", str(out), *FAST_FLAGS])
    assert rc == 0
    capsys.readouterr()
    assert "workers = 2" in (out / "run-config.txt").read_text()

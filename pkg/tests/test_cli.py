"""End-to-end CLI behavior through real subprocesses.

Every invocation goes through `python -m textmorph` so argument parsing,
exit codes, and file outputs are exercised exactly as a user sees them."""

import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from textmorph import RandomSource
from textmorph.imageio import load_image, save_image
from textmorph.manifest import read_repro_manifest, replay_row, write_manifest


def run_cli(*args, env_extra=None, cwd=None):
    env = os.environ.copy()
    env.pop("TEXTMORPH_THREADS", None)
    if env_extra:
        env.update(env_extra)
    return subprocess.run(
        [sys.executable, "-m", "textmorph", *args],
        capture_output=True,
        text=True,
        env=env,
        cwd=cwd,
    )


def _write_inputs(tmp_path):
    rng = RandomSource(5150)
    gray = (rng.random((20, 40)) * 255).astype(np.uint8)
    rgb = (rng.random((16, 30, 3)) * 255).astype(np.uint8)
    gray_path = tmp_path / "gray.png"
    rgb_path = tmp_path / "rgb.png"
    save_image(gray_path, gray)
    save_image(rgb_path, rgb)
    manifest = tmp_path / "manifest.tsv"
    write_manifest(manifest, [(str(gray_path), "abc"), (str(rgb_path), "xyz")])
    return manifest, {str(gray_path): gray, str(rgb_path): rgb}


def test_no_arguments_is_usage_error():
    res = run_cli()
    assert res.returncode == 1


def test_unknown_flag_is_usage_error():
    res = run_cli("bench", "--no-such-flag")
    assert res.returncode == 1
    assert "error" in res.stderr


def test_metrics_json():
    res = run_cli("metrics", "sitting", "kitten")
    assert res.returncode == 0
    payload = json.loads(res.stdout)
    assert payload["edit_distance"] == 3
    assert payload["cer"] == pytest.approx(3 / 7)
    assert payload["wer"] == 1.0


def test_metrics_empty_ground_truth_fails():
    res = run_cli("metrics", "", "kitten")
    assert res.returncode == 1
    assert "error" in res.stderr


def test_augment_radius_zero_reproduces_inputs(tmp_path):
    manifest, originals = _write_inputs(tmp_path)
    out_dir = tmp_path / "out"
    res = run_cli("augment", str(manifest), str(out_dir), "--radius", "0")
    assert res.returncode == 0, res.stderr
    rows = read_repro_manifest(out_dir / "reproduction.tsv")
    assert len(rows) == 2
    for row in rows:
        assert np.array_equal(load_image(row.output), originals[row.input])


def test_augment_same_seed_same_bytes(tmp_path):
    manifest, _ = _write_inputs(tmp_path)
    outs = []
    for name in ("a", "b"):
        out_dir = tmp_path / name
        res = run_cli(
            "augment", str(manifest), str(out_dir), "--seed", "11", "--copies", "2"
        )
        assert res.returncode == 0, res.stderr
        outs.append(out_dir)
    a_files = sorted(p.name for p in outs[0].glob("*.png"))
    b_files = sorted(p.name for p in outs[1].glob("*.png"))
    assert a_files == b_files and len(a_files) == 4
    for name in a_files:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def _repro_payload(out_dir):
    # reproduction rows minus the path columns, which embed out_dir
    lines = (out_dir / "reproduction.tsv").read_text().splitlines()
    rows = [l.split("\t") for l in lines if not l.startswith("#")]
    return [(Path(r[0]).name, *r[2:]) for r in rows]


def test_augment_worker_count_does_not_change_results(tmp_path):
    manifest, _ = _write_inputs(tmp_path)
    serial = tmp_path / "serial"
    pooled = tmp_path / "pooled"
    res = run_cli("augment", str(manifest), str(serial), "--seed", "3", "--copies", "3")
    assert res.returncode == 0, res.stderr
    res = run_cli(
        "augment",
        str(manifest),
        str(pooled),
        "--seed",
        "3",
        "--copies",
        "3",
        env_extra={"TEXTMORPH_THREADS": "3"},
    )
    assert res.returncode == 0, res.stderr
    names = sorted(p.name for p in serial.glob("*.png"))
    assert len(names) == 6
    assert names == sorted(p.name for p in pooled.glob("*.png"))
    for name in names:
        assert (serial / name).read_bytes() == (pooled / name).read_bytes()
    assert _repro_payload(serial) == _repro_payload(pooled)


def test_augment_copies_layout(tmp_path):
    manifest, _ = _write_inputs(tmp_path)
    out_dir = tmp_path / "out"
    res = run_cli("augment", str(manifest), str(out_dir), "--copies", "3")
    assert res.returncode == 0
    pngs = sorted(p.name for p in out_dir.glob("*.png"))
    assert pngs == [
        "gray_aug00.png",
        "gray_aug01.png",
        "gray_aug02.png",
        "rgb_aug00.png",
        "rgb_aug01.png",
        "rgb_aug02.png",
    ]
    assert len(read_repro_manifest(out_dir / "reproduction.tsv")) == 6


def test_augment_missing_input_is_partial_failure(tmp_path):
    manifest, originals = _write_inputs(tmp_path)
    rows = [(path, "gt") for path in originals]
    rows.insert(1, (str(tmp_path / "nope.png"), "missing"))
    write_manifest(manifest, rows)
    out_dir = tmp_path / "out"
    res = run_cli("augment", str(manifest), str(out_dir), "--radius", "0")
    assert res.returncode == 2
    assert "augment failed" in res.stderr
    good = read_repro_manifest(out_dir / "reproduction.tsv")
    assert len(good) == 2  # the two readable rows still produced output
    for row in good:
        assert Path(row.output).exists()


def test_augment_unreadable_manifest(tmp_path):
    res = run_cli("augment", str(tmp_path / "absent.tsv"), str(tmp_path / "out"))
    assert res.returncode == 1
    assert "cannot read manifest" in res.stderr


def test_train_demo_zero_steps(tmp_path):
    report = tmp_path / "run.log"
    res = run_cli("train-demo", "--steps", "0", "--report", str(report))
    assert res.returncode == 0, res.stderr
    assert report.read_text() == ""
    assert (tmp_path / "run_policy.png").exists()


def test_train_demo_report_is_deterministic(tmp_path):
    logs = []
    for name in ("r1", "r2"):
        report = tmp_path / f"{name}.log"
        res = run_cli(
            "train-demo", "--steps", "25", "--seed", "5", "--report", str(report)
        )
        assert res.returncode == 0, res.stderr
        assert "final 25 steps:" in res.stdout
        assert "margin=" in res.stdout
        assert (tmp_path / f"{name}_difficulty.png").exists()
        assert (tmp_path / f"{name}_policy.png").exists()
        logs.append(report.read_bytes())
    assert logs[0] == logs[1]
    assert logs[0].count(b"\n") == 25


def test_train_demo_rejects_bad_flags():
    assert run_cli("train-demo", "--steps", "-1").returncode == 1
    assert run_cli("train-demo", "--lr", "0").returncode == 1


def test_inspect_dump_grid_and_repro(tmp_path):
    manifest, originals = _write_inputs(tmp_path)
    img_path = next(iter(originals))
    grid_json = tmp_path / "grid.json"
    repro = tmp_path / "one.tsv"
    res = run_cli(
        "inspect",
        img_path,
        "--radius",
        "0",
        "--dump-grid",
        str(grid_json),
        "--repro",
        str(repro),
    )
    assert res.returncode == 0, res.stderr
    payload = json.loads(grid_json.read_text())
    assert payload["width"] == 40 and payload["height"] == 20
    assert payload["radius"] == 0.0
    assert payload["moved"] == payload["fiducials"]  # radius 0 moves nothing
    lat = payload["lattice"]
    assert lat["rows"] == 6 and lat["cols"] == 11 and lat["step"] == 4

    (row,) = read_repro_manifest(repro)
    img = load_image(img_path)
    assert np.array_equal(replay_row(row, img), img)


def test_inspect_missing_image(tmp_path):
    res = run_cli("inspect", str(tmp_path / "ghost.png"))
    assert res.returncode == 2
    assert "cannot read image" in res.stderr


def test_inspect_render_points(tmp_path):
    manifest, originals = _write_inputs(tmp_path)
    img_path = next(iter(originals))
    marked = tmp_path / "marked.png"
    res = run_cli("inspect", img_path, "--render-points", str(marked))
    assert res.returncode == 0, res.stderr
    out = load_image(marked)
    assert out.ndim == 3 and out.shape[2] == 3


def test_bench_reports_single_thread_line():
    res = run_cli("bench", "--iters", "3")
    assert res.returncode == 0, res.stderr
    assert "threads=1 iters=3 median_ms=" in res.stdout

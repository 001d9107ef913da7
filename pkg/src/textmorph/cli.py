"""Command-line interface.

Subcommands: augment (batch over a manifest), train-demo (the joint loop on
the bundled glyph task), bench (throughput), inspect (dump one deformation's
geometry), metrics (string metrics as JSON, for scripting).

Exit codes: 0 success, 1 usage error, 2 partial failure (some inputs failed
but the run continued). The TEXTMORPH_THREADS environment variable overrides
any --threads flag and sets the worker count for batch augmentation.

All randomness flows from one --seed through named sub-streams keyed by row
and copy index, so results do not depend on worker scheduling.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import demo as demo_mod
from .augment import AugmentConfig, augment, init_fiducials, random_state, sample_offsets
from .errors import EmptyGroundTruth, TextmorphError
from .glyphs import load_default_task, render_word
from .imageio import load_image, save_image
from .manifest import ReproRow, format_repro_row, read_manifest, write_repro_manifest
from .metrics import cer, edit_distance, wer
from .mls import ControlPointSet, DeformationMode, FillRule, build_warp_grid
from .rng import RandomSource

THREADS_ENV = "TEXTMORPH_THREADS"


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the published contract is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _parse_fill(text: str) -> FillRule:
    if text == "replicate":
        return FillRule.replicate()
    if text.startswith("constant:"):
        vals = text[len("constant:") :]
        try:
            return FillRule.constant(*(int(v) for v in vals.split(",")))
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e)) from None
    raise argparse.ArgumentTypeError(
        f"bad fill {text!r}; expected 'replicate', 'constant:V', or 'constant:R,G,B'"
    )


def _add_augment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n-patches", type=int, default=3, help="patch count N (default 3)")
    p.add_argument("--radius", type=float, default=10.0, help="moving radius in px (default 10)")
    p.add_argument(
        "--mode",
        type=DeformationMode.parse,
        default=DeformationMode.SIMILARITY,
        help="affine|similarity|rigid (default similarity)",
    )
    p.add_argument("--step", type=int, default=4, help="warp lattice step in px (default 4)")
    p.add_argument(
        "--fill",
        type=_parse_fill,
        default=FillRule.replicate(),
        help="replicate | constant:V | constant:R,G,B (default replicate)",
    )
    p.add_argument("--seed", type=int, default=0, help="root RNG seed (default 0)")


def _cfg_from_args(args) -> AugmentConfig:
    return AugmentConfig(
        n_patches=args.n_patches,
        radius=args.radius,
        mode=args.mode,
        step=args.step,
        fill=args.fill,
        rng_seed=args.seed,
    )


def _thread_count(flag_value: int | None) -> int:
    env = os.environ.get(THREADS_ENV)
    if env is not None:
        try:
            n = int(env)
        except ValueError:
            raise SystemExit(f"bad {THREADS_ENV}={env!r}; expected an integer")
        return max(1, n)
    return max(1, flag_value if flag_value is not None else 1)


# ---------------------------------------------------------------- augment

def _augment_worker(job):
    """Process one (manifest row, copy) pair. Runs in a worker process."""
    (img_path, gt, out_path, cfg, seed, row_idx, copy_idx) = job
    try:
        img = load_image(img_path)
        rng = RandomSource(seed).substream("augment", row_idx, copy_idx)
        out, cps = augment(img, cfg, state=None, rng=rng)
        save_image(out_path, out)
        row = ReproRow(
            output=str(out_path),
            input=str(img_path),
            ground_truth=gt,
            mode=cfg.mode,
            step=cfg.step,
            alpha=cfg.alpha,
            fill=cfg.fill,
            points_src=cps.p,
            points_dst=cps.q,
        )
        return (row_idx, copy_idx, None, format_repro_row(row))
    except Exception as e:  # per-file diagnostics; the batch keeps going
        return (row_idx, copy_idx, f"{img_path}: {e}", None)


def cmd_augment(args) -> int:
    try:
        rows = read_manifest(args.manifest)
    except (OSError, ValueError) as e:
        print(f"cannot read manifest: {e}", file=sys.stderr)
        return 1
    cfg = _cfg_from_args(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    # Unique output stem per distinct input path; duplicate stems get a row suffix.
    stems: dict[str, str] = {}
    jobs = []
    for row_idx, (img_path, gt) in enumerate(rows):
        stem = Path(img_path).stem
        owner = stems.setdefault(stem, img_path)
        if owner != img_path:
            stem = f"{stem}-{row_idx}"
        for copy_idx in range(args.copies):
            out_path = out_dir / f"{stem}_aug{copy_idx:02d}.png"
            jobs.append((img_path, gt, str(out_path), cfg, args.seed, row_idx, copy_idx))

    threads = _thread_count(None)
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_augment_worker, jobs, chunksize=8))
    else:
        results = [_augment_worker(j) for j in jobs]

    failures = 0
    repro_lines = {}
    for row_idx, copy_idx, err, line in results:
        if err is not None:
            failures += 1
            print(f"augment failed: {err}", file=sys.stderr)
        else:
            repro_lines[(row_idx, copy_idx)] = line

    repro_path = out_dir / "reproduction.tsv"
    ordered = [repro_lines[k] for k in sorted(repro_lines)]
    header = "# output\tinput\tground_truth\tmode\tstep\talpha\tfill\tpoints_src\tpoints_dst"
    repro_path.write_text("\n".join([header] + ordered) + "\n", "utf-8")

    print(f"wrote {len(ordered)} images to {out_dir} ({failures} failures)")
    return 2 if failures else 0


# ------------------------------------------------------------- train-demo

def cmd_train_demo(args) -> int:
    if args.steps < 0:
        print(f"--steps must be >= 0, got {args.steps}", file=sys.stderr)
        return 1
    if args.lr <= 0:
        print(f"--lr must be > 0, got {args.lr}", file=sys.stderr)
        return 1

    log_lines: list[str] = []
    sink = log_lines.append if args.report else None
    result = demo_mod.run_demo(
        steps=args.steps,
        lr=args.lr,
        n_patches=args.n_patches,
        radius=args.radius,
        seed=args.seed,
        log_sink=sink,
    )

    if args.report:
        report_path = Path(args.report)
        report_path.write_text(
            "\n".join(log_lines) + ("\n" if log_lines else ""), "utf-8"
        )
        from .plotting import render_demo_figures

        figures = render_demo_figures(result, report_path.with_suffix(""))
        print(f"report: {report_path}")
        for f in figures:
            print(f"figure: {f}")

    probs = result.final_probabilities
    print("final policy probabilities, P(sign = +1):")
    n_cols = probs.shape[0] // 2
    for i in range(probs.shape[0]):
        where = "top" if i < n_cols else "bottom"
        col = i if i < n_cols else i - n_cols
        print(f"  point {i:2d} ({where} {col}): x={probs[i, 0]:.4f} y={probs[i, 1]:.4f}")
    window = min(demo_mod.MARGIN_WINDOW, result.steps)
    print(
        f"final {window} steps: agent_mean_ed={result.agent_mean_ed:.4f} "
        f"random_mean_ed={result.random_mean_ed:.4f} margin={result.margin:+.4f}"
    )
    return 0


# ------------------------------------------------------------------ bench

def _bench_timings(width, height, iters, cfg, seed) -> list[float]:
    task = load_default_task()
    word = "".join(task.alphabet[i % len(task.alphabet)] for i in range(8))
    img = render_word(task, word, width, height)
    root = RandomSource(seed)
    times = []
    for i in range(iters):
        rng = root.substream("bench", i)
        t0 = time.perf_counter()
        augment(img, cfg, state=None, rng=rng)
        times.append(time.perf_counter() - t0)
    return times


def _bench_worker(job):
    width, height, iters, cfg, seed = job
    return _bench_timings(width, height, iters, cfg, seed)


def cmd_bench(args) -> int:
    if args.iters < 1:
        print(f"--iters must be >= 1, got {args.iters}", file=sys.stderr)
        return 1
    cfg = AugmentConfig(step=args.step)
    threads = _thread_count(args.threads)

    times = _bench_timings(args.width, args.height, args.iters, cfg, seed=0)
    total = sum(times)
    med = float(np.median(times)) * 1e3
    p95 = float(np.percentile(times, 95)) * 1e3
    rate1 = args.iters / total if total > 0 else float("inf")
    print(
        f"threads=1 iters={args.iters} median_ms={med:.3f} p95_ms={p95:.3f} "
        f"images_per_s={rate1:.1f}"
    )

    if threads > 1:
        per = max(1, args.iters // threads)
        jobs = [(args.width, args.height, per, cfg, 1000 + t) for t in range(threads)]
        t0 = time.perf_counter()
        with ProcessPoolExecutor(max_workers=threads) as pool:
            batches = list(pool.map(_bench_worker, jobs))
        wall = time.perf_counter() - t0
        all_times = [t for b in batches for t in b]
        medt = float(np.median(all_times)) * 1e3
        p95t = float(np.percentile(all_times, 95)) * 1e3
        n = per * threads
        rate = n / wall if wall > 0 else float("inf")
        print(
            f"threads={threads} iters={n} median_ms={medt:.3f} p95_ms={p95t:.3f} "
            f"images_per_s={rate:.1f} scaling_x={rate / rate1:.2f}"
        )
    return 0


# ---------------------------------------------------------------- inspect

def cmd_inspect(args) -> int:
    try:
        img = load_image(args.image)
    except (OSError, ValueError) as e:
        print(f"cannot read image: {e}", file=sys.stderr)
        return 2
    cfg = _cfg_from_args(args)
    h, w = img.shape[0], img.shape[1]
    rng = RandomSource(args.seed).substream("augment", 0, 0)
    layout = init_fiducials(w, h, cfg.n_patches)
    state = random_state(cfg.n_patches, rng)
    moved = sample_offsets(layout, state, cfg.radius, rng)
    cps = ControlPointSet(layout.points, tuple(moved), alpha=cfg.alpha)
    grid = build_warp_grid(w, h, cps, cfg.mode, cfg.step)

    print(f"image: {args.image} ({w}x{h})")
    print(f"fiducials ({len(layout.points)}):")
    for p, q in zip(layout.points, moved):
        print(f"  ({p.x:8.3f}, {p.y:8.3f}) -> ({q.x:8.3f}, {q.y:8.3f})")
    print(f"lattice: rows={grid.rows} cols={grid.cols} step={grid.step}")

    if args.dump_grid:
        payload = {
            "width": w,
            "height": h,
            "n_patches": cfg.n_patches,
            "radius": cfg.radius,
            "mode": cfg.mode.value,
            "step": cfg.step,
            "alpha": cfg.alpha,
            "seed": args.seed,
            "fiducials": [[p.x, p.y] for p in layout.points],
            "moved": [[q.x, q.y] for q in moved],
            "lattice": {
                "rows": grid.rows,
                "cols": grid.cols,
                "step": grid.step,
                "src_coords": grid.src_coords.tolist(),
            },
        }
        Path(args.dump_grid).write_text(json.dumps(payload, indent=1), "utf-8")
        print(f"grid: {args.dump_grid}")

    if args.repro:
        row = ReproRow(
            output="",
            input=str(args.image),
            ground_truth="",
            mode=cfg.mode,
            step=cfg.step,
            alpha=cfg.alpha,
            fill=cfg.fill,
            points_src=cps.p,
            points_dst=cps.q,
        )
        write_repro_manifest(args.repro, [row])
        print(f"repro: {args.repro}")

    if args.render_points:
        from .mls import warp_image

        out = warp_image(img, grid, cfg.fill)
        if out.ndim == 2:
            canvas = np.stack([out] * 3, axis=2)
        else:
            canvas = out.copy()
        for pt, color in [(layout.points, (0, 0, 255)), (moved, (255, 0, 0))]:
            for p in pt:
                x, y = int(round(p.x)), int(round(p.y))
                y0, y1 = max(0, y - 1), min(h, y + 2)
                x0, x1 = max(0, x - 1), min(w, x + 2)
                if y0 < y1 and x0 < x1:
                    canvas[y0:y1, x0:x1] = color
        save_image(args.render_points, canvas)
        print(f"render: {args.render_points}")
    return 0


# ---------------------------------------------------------------- metrics

def cmd_metrics(args) -> int:
    try:
        payload = {
            "edit_distance": edit_distance(args.pred, args.gt),
            "cer": cer(args.pred, args.gt),
            "wer": wer(args.pred, args.gt),
        }
    except EmptyGroundTruth as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    print(json.dumps(payload))
    return 0


# ------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="textmorph", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("augment", help="augment every image in a manifest")
    p.add_argument("manifest", help="TSV manifest: image_path<TAB>ground_truth")
    p.add_argument("out_dir", help="output directory")
    _add_augment_flags(p)
    p.add_argument("--copies", type=int, default=1, help="augmented copies per input")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train-demo", help="run the joint training loop on the glyph task")
    p.add_argument("--steps", type=int, default=demo_mod.DEMO_STEPS)
    p.add_argument("--lr", type=float, default=demo_mod.DEMO_LR)
    p.add_argument("--n-patches", type=int, default=demo_mod.DEMO_N_PATCHES)
    p.add_argument("--radius", type=float, default=demo_mod.DEMO_RADIUS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="write the per-step log here, plus figures")
    p.set_defaults(func=cmd_train_demo)

    p = sub.add_parser("bench", help="time the augmentation pipeline")
    p.add_argument("--width", type=int, default=100)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--iters", type=int, default=300)
    p.add_argument("--step", type=int, default=4)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect", help="dump one augmentation's geometry")
    p.add_argument("image", help="input image (PNG or PGM)")
    _add_augment_flags(p)
    p.add_argument("--dump-grid", help="write layout + lattice as JSON here")
    p.add_argument("--repro", help="write a single-row reproduction manifest here")
    p.add_argument("--render-points", help="write the warped image with control points marked")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("metrics", help="string metrics as JSON")
    p.add_argument("gt", help="ground-truth string")
    p.add_argument("pred", help="predicted string")
    p.set_defaults(func=cmd_metrics)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except TextmorphError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

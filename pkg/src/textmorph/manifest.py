"""Input manifests and reproduction manifests.

Input manifest: UTF-8 text, one `image_path<TAB>ground_truth` row per line,
'#' lines are comments. Tabs, backslashes, and newlines inside the text field
travel escaped (\\t, \\\\, \\n).

Reproduction manifest: everything needed to re-create an augmented output
bit-exactly without any RNG: the realized control points ride along as
full-precision decimal strings (repr round-trips float64 exactly). One row
per output image.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mls import ControlPointSet, DeformationMode, FillRule, Point2, build_warp_grid, warp_image

REPRO_COLUMNS = (
    "output",
    "input",
    "ground_truth",
    "mode",
    "step",
    "alpha",
    "fill",
    "points_src",
    "points_dst",
)


def escape_text(text: str) -> str:
    return text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def unescape_text(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        c = text[i]
        if c == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            mapped = {"t": "\t", "n": "\n", "\\": "\\"}.get(nxt)
            if mapped is not None:
                out.append(mapped)
                i += 2
                continue
        out.append(c)
        i += 1
    return "".join(out)


def read_manifest(path) -> list[tuple[str, str]]:
    rows = []
    for lineno, raw in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        line = raw.strip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        img_path, sep, text = line.partition("\t")
        if not sep or not img_path:
            raise ValueError(f"{path}:{lineno}: expected 'image_path<TAB>text'")
        rows.append((img_path, unescape_text(text)))
    return rows


def write_manifest(path, rows: list[tuple[str, str]]) -> None:
    lines = [f"{img}\t{escape_text(text)}" for img, text in rows]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")


def _encode_points(points) -> str:
    return ";".join(f"{repr(float(p[0]))},{repr(float(p[1]))}" for p in points)


def _decode_points(text: str) -> tuple[Point2, ...]:
    pts = []
    for chunk in text.split(";"):
        xs, _, ys = chunk.partition(",")
        pts.append(Point2(float(xs), float(ys)))
    return tuple(pts)


def _encode_fill(fill: FillRule) -> str:
    if fill.kind == FillRule.REPLICATE_KIND:
        return "replicate"
    return "constant:" + ",".join(str(v) for v in fill.value)


def _decode_fill(text: str) -> FillRule:
    if text == "replicate":
        return FillRule.replicate()
    kind, _, vals = text.partition(":")
    if kind != "constant" or not vals:
        raise ValueError(f"bad fill spec {text!r}")
    return FillRule.constant(*(int(v) for v in vals.split(",")))


@dataclass(frozen=True)
class ReproRow:
    """One reproducible augmentation: where it came from and exactly how it moved."""

    output: str
    input: str
    ground_truth: str
    mode: DeformationMode
    step: int
    alpha: float
    fill: FillRule
    points_src: tuple[Point2, ...]
    points_dst: tuple[Point2, ...]

    def control_points(self) -> ControlPointSet:
        return ControlPointSet(self.points_src, self.points_dst, alpha=self.alpha)


def format_repro_row(row: ReproRow) -> str:
    fields = [
        escape_text(row.output),
        escape_text(row.input),
        escape_text(row.ground_truth),
        row.mode.value,
        str(row.step),
        repr(float(row.alpha)),
        _encode_fill(row.fill),
        _encode_points(row.points_src),
        _encode_points(row.points_dst),
    ]
    return "\t".join(fields)


def write_repro_manifest(path, rows: list[ReproRow]) -> None:
    lines = ["# " + "\t".join(REPRO_COLUMNS)]
    lines += [format_repro_row(r) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n", "utf-8")


def read_repro_manifest(path) -> list[ReproRow]:
    rows = []
    for lineno, raw in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        line = raw.strip("\r")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != len(REPRO_COLUMNS):
            raise ValueError(
                f"{path}:{lineno}: expected {len(REPRO_COLUMNS)} fields, got {len(fields)}"
            )
        rows.append(
            ReproRow(
                output=unescape_text(fields[0]),
                input=unescape_text(fields[1]),
                ground_truth=unescape_text(fields[2]),
                mode=DeformationMode.parse(fields[3]),
                step=int(fields[4]),
                alpha=float(fields[5]),
                fill=_decode_fill(fields[6]),
                points_src=_decode_points(fields[7]),
                points_dst=_decode_points(fields[8]),
            )
        )
    return rows


def replay_row(row: ReproRow, img: np.ndarray) -> np.ndarray:
    """Re-run the recorded warp on the input image. Bit-exact with the
    original because the realized control points are stored losslessly."""
    h, w = img.shape[0], img.shape[1]
    grid = build_warp_grid(w, h, row.control_points(), row.mode, row.step)
    return warp_image(img, grid, row.fill)

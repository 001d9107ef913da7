"""Bundled synthetic glyph task: a deterministic renderer and a deliberately
weak template recognizer, so the whole training loop runs at desk scale.

Templates live in the repo as plain-text bitmaps (rows of '0'/'1', '#' lines
are comments), one file per character, so nothing depends on a font stack.
The digits were designed so that the discriminative strokes sit in the top
rows of each glyph with an empty band below them: vertical displacement
toward the canvas border destroys identity faster than displacement into the
body, which gives the difficulty signal a usable direction. Any same-size
alphabet with pairwise template difference >= 10% of pixels works here.

The recognizer splits the image into equal-width cells and template-matches
each cell by mean absolute difference. It shares the renderer's cell
geometry, which is what makes the zero-distortion round trip exact. It must
stay this weak: a robust recognizer would erase the difficulty differences
the agent learns from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import DoesNotFit, UnknownCharacter

MIN_PAIRWISE_DIFF = 0.10  # fraction of pixels two templates must differ in

TEMPLATE_COMMENT = "#"


@dataclass(frozen=True)
class GlyphTask:
    """Immutable alphabet + bitmaps + renderer geometry. Shareable across threads."""

    alphabet: str
    bitmaps: dict[str, np.ndarray]  # char -> (th, tw) bool
    margin: int = 0  # blank border inside each cell, px
    _cell_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "bitmaps", dict(self.bitmaps))  # callers keep theirs
        if not self.alphabet:
            raise ValueError("alphabet must be nonempty")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ValueError("alphabet has repeated characters")
        if set(self.alphabet) != set(self.bitmaps):
            raise ValueError("bitmaps must cover exactly the alphabet")
        shapes = {self.bitmaps[c].shape for c in self.alphabet}
        if len(shapes) != 1:
            raise ValueError(f"templates differ in size: {sorted(shapes)}")
        th, tw = shapes.pop()
        if th < 2 or tw < 2 or self.margin < 0:
            raise ValueError("template size must be >= 2x2 and margin >= 0")
        total = th * tw
        chars = self.alphabet
        for i in range(len(chars)):
            for j in range(i + 1, len(chars)):
                diff = int(
                    (self.bitmaps[chars[i]] != self.bitmaps[chars[j]]).sum()
                )
                if diff < MIN_PAIRWISE_DIFF * total:
                    raise ValueError(
                        f"templates {chars[i]!r} and {chars[j]!r} differ in only "
                        f"{diff}/{total} pixels (< {MIN_PAIRWISE_DIFF:.0%})"
                    )
        for c in chars:
            b = np.array(self.bitmaps[c], dtype=bool)
            b.flags.writeable = False
            self.bitmaps[c] = b

    @property
    def template_shape(self) -> tuple[int, int]:
        return next(iter(self.bitmaps.values())).shape


def parse_bitmap(text: str) -> np.ndarray:
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith(TEMPLATE_COMMENT):
            continue
        if set(line) - {"0", "1"}:
            raise ValueError(f"bitmap rows must be '0'/'1' strings, got {line!r}")
        rows.append([ch == "1" for ch in line])
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("bitmap must have at least one row, all of equal width")
    return np.asarray(rows, dtype=bool)


def format_bitmap(bitmap: np.ndarray, header: str = "textmorph glyph bitmap v1") -> str:
    lines = [f"{TEMPLATE_COMMENT} {header}"]
    for row in np.asarray(bitmap, dtype=bool):
        lines.append("".join("1" if v else "0" for v in row))
    return "\n".join(lines) + "\n"


def load_default_task() -> GlyphTask:
    """The digits 0-9 shipped with the package."""
    alphabet = "0123456789"
    bitmaps = {}
    base = resources.files("textmorph").joinpath("data/glyphs")
    for c in alphabet:
        bitmaps[c] = parse_bitmap(base.joinpath(f"{c}.txt").read_text("utf-8"))
    return GlyphTask(alphabet=alphabet, bitmaps=bitmaps)


def _scale_nearest(bitmap: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    in_h, in_w = bitmap.shape
    ri = np.floor((np.arange(out_h) + 0.5) * in_h / out_h).astype(np.intp)
    ci = np.floor((np.arange(out_w) + 0.5) * in_w / out_w).astype(np.intp)
    return bitmap[ri][:, ci]


def _cell_bounds(width: int, n: int) -> list[int]:
    # round-half-even at exact .5 boundaries; the recognizer reuses this, so
    # renderer and matcher always agree on cell edges
    return [int(round(k * width / n)) for k in range(n + 1)]


def _render_cell(
    canvas: np.ndarray, bitmap: np.ndarray, x0: int, x1: int, margin: int
) -> None:
    h = canvas.shape[0]
    gw = (x1 - x0) - 2 * margin
    gh = h - 2 * margin
    if gw < 2 or gh < 2:
        raise DoesNotFit(
            f"cell {x1 - x0}px wide leaves {gw}x{gh}px for the glyph (need >= 2x2)"
        )
    scaled = _scale_nearest(bitmap, gh, gw)
    region = canvas[margin : margin + gh, x0 + margin : x0 + margin + gw]
    region[scaled] = 0


def render_word(task: GlyphTask, text: str, width: int, height: int) -> np.ndarray:
    """Dark glyphs on a light background, one equal-width cell per character.

    Empty text gives a blank canvas. Deterministic: same inputs, same bytes.
    """
    width, height = int(width), int(height)
    if width < 2 or height < 2:
        raise DoesNotFit(f"canvas must be at least 2x2, got {width}x{height}")
    canvas = np.full((height, width), 255, dtype=np.uint8)
    if not text:
        return canvas
    for c in text:
        if c not in task.bitmaps:
            raise UnknownCharacter(f"character {c!r} not in alphabet {task.alphabet!r}")
    bounds = _cell_bounds(width, len(text))
    for i, c in enumerate(text):
        _render_cell(canvas, task.bitmaps[c], bounds[i], bounds[i + 1], task.margin)
    return canvas


def _cell_templates(task: GlyphTask, cell_w: int, height: int) -> np.ndarray:
    """(n_alphabet, height, cell_w) uint8 stack of each char rendered alone
    into a cell of this geometry. Memoized on the task."""
    key = (cell_w, height)
    cached = task._cell_cache.get(key)
    if cached is not None:
        return cached
    stack = np.empty((len(task.alphabet), height, cell_w), dtype=np.uint8)
    for i, c in enumerate(task.alphabet):
        cell = np.full((height, cell_w), 255, dtype=np.uint8)
        _render_cell(cell, task.bitmaps[c], 0, cell_w, task.margin)
        stack[i] = cell
    stack.flags.writeable = False
    task._cell_cache[key] = stack
    return stack


def _to_gray(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] in (1, 3):
        mean = arr.astype(np.float64).mean(axis=2)
        return np.clip(np.floor(mean + 0.5), 0, 255).astype(np.uint8)
    raise ValueError(f"expected grayscale or 3-channel image, got shape {arr.shape}")


class TemplateRecognizer:
    """Recognizer-contract adapter around template_recognize.

    Cell count is fixed at construction; the bundled demos train on
    fixed-length words. The training hook is a no-op because template
    matching has nothing to fit.
    """

    def __init__(self, task: GlyphTask, n_chars: int):
        if n_chars < 1:
            raise ValueError(f"n_chars must be >= 1, got {n_chars}")
        self.task = task
        self.n_chars = int(n_chars)

    def recognize(self, img) -> str:
        return template_recognize(self.task, img, self.n_chars)

    def observe_training_example(self, img, gt: str) -> None:
        pass


def template_recognize(task: GlyphTask, img: np.ndarray, n_chars: int) -> str:
    """Segment into n_chars equal-width cells and template-match each one by
    mean absolute difference. Always emits exactly n_chars characters; ties
    resolve to the earliest alphabet character."""
    if n_chars < 1:
        raise ValueError(f"n_chars must be >= 1, got {n_chars}")
    gray = _to_gray(img)
    h, w = gray.shape
    bounds = _cell_bounds(w, n_chars)
    out = []
    for i in range(n_chars):
        x0, x1 = bounds[i], bounds[i + 1]
        cell = gray[:, x0:x1].astype(np.float64)
        templates = _cell_templates(task, x1 - x0, h).astype(np.float64)
        mad = np.abs(templates - cell[None, :, :]).mean(axis=(1, 2))
        out.append(task.alphabet[int(np.argmin(mad))])
    return "".join(out)

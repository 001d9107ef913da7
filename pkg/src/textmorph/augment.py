"""Fiducial layout, moving states, and the one-call augmentation pipeline.

An image of width W and height H gets 2(N+1) fiducial points: N+1 along the
top border (y = 0) and N+1 along the bottom border (y = H-1), with x spaced
at k*W/N and the last column clamped to W-1. A moving state assigns each
point a +-1 direction per axis; actual distances are drawn uniformly from
[0, radius] per axis, so the state controls direction only. Moved points are
deliberately not clamped to the image rectangle; out-of-range sampling is the
fill rule's job. Clamping would bias corner movements.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidDimensions, LengthMismatch
from .mls import (
    REPLICATE,
    ControlPointSet,
    DeformationMode,
    FillRule,
    Point2,
    build_warp_grid,
    warp_image,
)
from .rng import RandomSource


@dataclass(frozen=True)
class FiducialLayout:
    n_patches: int
    width: int
    height: int
    points: tuple[Point2, ...]

    @property
    def n_points(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class MovingState:
    """Per-point direction signs, shape (2(N+1), 2): column 0 = x, column 1 = y."""

    signs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.signs, dtype=np.int8)  # copy; callers keep their array
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 4 or arr.shape[0] % 2:
            raise ValueError(f"state must have shape (2(N+1), 2), got {arr.shape}")
        if not np.isin(arr, (-1, 1)).all():
            raise ValueError("state entries must be +1 or -1")
        arr.flags.writeable = False
        object.__setattr__(self, "signs", arr)

    @property
    def n_points(self) -> int:
        return self.signs.shape[0]

    @property
    def n_components(self) -> int:
        return self.signs.size

    def negated(self) -> "MovingState":
        return MovingState(-self.signs)

    def with_flipped(self, flat_index: int) -> "MovingState":
        arr = self.signs.copy()
        arr.reshape(-1)[flat_index] *= -1
        return MovingState(arr)

    def flat(self) -> np.ndarray:
        """Row-major flattening: component 2*i is point i's x sign, 2*i+1 its y sign."""
        return self.signs.reshape(-1)

    def __eq__(self, other) -> bool:
        return isinstance(other, MovingState) and np.array_equal(self.signs, other.signs)

    def __hash__(self):
        return hash(self.signs.tobytes())


@dataclass(frozen=True)
class AugmentConfig:
    """Knobs of one augmentation. Defaults fit 32x100 text crops."""

    n_patches: int = 3
    radius: float = 10.0
    mode: DeformationMode = DeformationMode.SIMILARITY
    step: int = 4
    fill: FillRule = field(default_factory=FillRule.replicate)
    rng_seed: int = 0
    alpha: float = 1.0

    def __post_init__(self):
        if self.n_patches < 1:
            raise InvalidDimensions(f"n_patches must be >= 1, got {self.n_patches}")
        if not (self.radius >= 0):
            raise ValueError(f"radius must be >= 0, got {self.radius}")
        if self.step < 1:
            raise InvalidDimensions(f"step must be >= 1, got {self.step}")
        if not (self.alpha > 0):
            raise ValueError("alpha must be > 0")


def init_fiducials(width: int, height: int, n_patches: int) -> FiducialLayout:
    """Lay out 2(N+1) border fiducials: top row then bottom row, left to right."""
    width, height, n_patches = int(width), int(height), int(n_patches)
    if width < 2 or height < 2:
        raise InvalidDimensions(f"image must be at least 2x2, got {width}x{height}")
    if n_patches < 1:
        raise InvalidDimensions(f"n_patches must be >= 1, got {n_patches}")
    xs = [min(k * width / n_patches, float(width - 1)) for k in range(n_patches + 1)]
    top = [Point2(x, 0.0) for x in xs]
    bottom = [Point2(x, float(height - 1)) for x in xs]
    return FiducialLayout(n_patches, width, height, tuple(top + bottom))


def random_state(n_patches: int, rng: RandomSource) -> MovingState:
    """Each sign independently +-1 with probability 1/2."""
    shape = (2 * (n_patches + 1), 2)
    draws = rng.random(shape)
    return MovingState(np.where(draws < 0.5, 1, -1).astype(np.int8))


def perturb_state(state: MovingState, rng: RandomSource) -> tuple[MovingState, int]:
    """Flip exactly one uniformly chosen (point, axis) component.

    Returns the new state and the flat index of the flipped component.
    """
    idx = int(rng.integers(0, state.n_components))
    return state.with_flipped(idx), idx


def stretch_state(n_patches: int) -> MovingState:
    """Convenience preset: columns push alternately left and right.

    Top and bottom points of each column share the x sign, so columns sway
    together; vertical signs all point down to keep rows parallel.
    """
    n_cols = n_patches + 1
    col_x = [1 if k % 2 == 0 else -1 for k in range(n_cols)]
    half = [[sx, 1] for sx in col_x]
    return MovingState(np.asarray(half + half, dtype=np.int8))


def perspective_state(n_patches: int) -> MovingState:
    """Convenience preset: the top border moves opposite to the bottom border,
    tilting the text block like a perspective foreshortening."""
    n_cols = n_patches + 1
    top = [[1, 1]] * n_cols
    bottom = [[-1, -1]] * n_cols
    return MovingState(np.asarray(top + bottom, dtype=np.int8))


def sample_offsets(
    layout: FiducialLayout, state: MovingState, radius: float, rng: RandomSource
) -> list[Point2]:
    """Draw the moved points q.

    Distances are drawn in one uniform(0, radius) call of shape (n_points, 2),
    row i = (dx_i, dy_i), then multiplied by the state's signs. The draw does
    not depend on the state, so replaying the same stream with a different
    state moves the same distances in different directions. Moved points are
    not clamped to the image.
    """
    if state.n_points != layout.n_points:
        raise LengthMismatch(
            f"state has {state.n_points} points but layout has {layout.n_points}"
        )
    if not (radius >= 0):
        raise ValueError(f"radius must be >= 0, got {radius}")
    dist = rng.uniform(0.0, radius, size=(layout.n_points, 2))
    offsets = dist * state.signs
    return [
        Point2(pt.x + float(offsets[i, 0]), pt.y + float(offsets[i, 1]))
        for i, pt in enumerate(layout.points)
    ]


def augment(
    img: np.ndarray,
    cfg: AugmentConfig,
    state: MovingState | None = None,
    rng: RandomSource | None = None,
) -> tuple[np.ndarray, ControlPointSet]:
    """Full pipeline: layout, offsets, grid, warp.

    Returns the augmented image plus the realized control points (sources p,
    moved targets q) for logging and bit-exact reproduction. With state=None a
    state is drawn first; with rng=None a source is built from cfg.rng_seed.
    Draw order is fixed: state (if needed), then distances.
    """
    arr = np.asarray(img)
    if arr.ndim not in (2, 3):
        raise ValueError(f"expected 2D or 3D image array, got shape {arr.shape}")
    h, w = arr.shape[0], arr.shape[1]
    if rng is None:
        rng = RandomSource(cfg.rng_seed)
    layout = init_fiducials(w, h, cfg.n_patches)
    if state is None:
        state = random_state(cfg.n_patches, rng)
    q = sample_offsets(layout, state, cfg.radius, rng)
    cps = ControlPointSet(layout.points, tuple(q), alpha=cfg.alpha)
    grid = build_warp_grid(w, h, cps, cfg.mode, cfg.step)
    out = warp_image(arr, grid, cfg.fill)
    return out, cps

"""Moving-least-squares deformation core.

Each query point u gets its own little transform fitted to the control-point
displacements, weighted by inverse distance:

    T(u) = (u - p*) M + q*          (row-vector convention)

    w_i  = 1 / |p_i - u|^(2 alpha)
    p*   = sum(w_i p_i) / sum(w_i),   q* likewise
    M    = argmin over the mode's class of  sum w_i |phat_i M - qhat_i|^2
           with phat_i = p_i - p*, qhat_i = q_i - q*

Closed forms per mode (perp denotes (x, y) -> (-y, x)):

    Affine      M = (sum w_i phat_i^T phat_i)^-1 (sum w_i phat_i^T qhat_i)
    Similarity  M = [[a, b], [-b, a]],
                a = sum w_i <phat_i, qhat_i> / mu,
                b = sum w_i <phat_i^perp, qhat_i> / mu,
                mu = sum w_i |phat_i|^2
    Rigid       Similarity M scaled by 1 / sqrt(a^2 + b^2)

A query landing exactly on a control point (within 1e-12) takes the
interpolation branch T(u) = q_i + (u - p_i) instead of the weighted fit.

Whole-image warping goes through a coarse lattice: the transform is solved
only at lattice nodes (build_warp_grid), then bilinearly interpolated per
pixel (warp_image). Warping is backward: the grid is solved with control
roles swapped (sources = q, targets = p), so each output pixel knows where
to sample the input, which leaves no holes.

All internal math runs in float64. Pixel values quantize round-half-up.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    DegenerateConfiguration,
    DimensionMismatch,
    InvalidDimensions,
    LengthMismatch,
    ZeroWeightSum,
)

# Distance below which a query point is treated as sitting on a control point.
COINCIDENCE_EPS = 1e-12
# Relative thresholds for unsolvable configurations.
DEGENERACY_EPS = 1e-12


class Point2(NamedTuple):
    x: float
    y: float


class DeformationMode(enum.Enum):
    AFFINE = "affine"
    SIMILARITY = "similarity"
    RIGID = "rigid"

    @classmethod
    def parse(cls, name: str) -> "DeformationMode":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown deformation mode {name!r}; expected affine, similarity, or rigid"
            ) from None


@dataclass(frozen=True)
class FillRule:
    """Out-of-bounds sampling policy: replicate the border, or a constant.

    ``value`` is one 8-bit level per channel; a single value broadcasts over
    all channels of the image being warped.
    """

    kind: str
    value: tuple[int, ...] = (0,)

    REPLICATE_KIND = "replicate"
    CONSTANT_KIND = "constant"

    def __post_init__(self):
        if self.kind not in (self.REPLICATE_KIND, self.CONSTANT_KIND):
            raise ValueError(f"unknown fill kind {self.kind!r}")
        for v in self.value:
            if not (0 <= int(v) <= 255):
                raise ValueError("fill values must be 8-bit (0..255)")

    @classmethod
    def replicate(cls) -> "FillRule":
        return cls(cls.REPLICATE_KIND)

    @classmethod
    def constant(cls, *value: int) -> "FillRule":
        if not value:
            raise ValueError("constant fill needs at least one channel value")
        return cls(cls.CONSTANT_KIND, tuple(int(v) for v in value))


REPLICATE = FillRule.replicate()


def _as_xy_array(points: Sequence, name: str) -> np.ndarray:
    arr = np.asarray([(float(p[0]), float(p[1])) for p in points], dtype=np.float64)
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite coordinates")
    return arr.reshape(-1, 2)


@dataclass(frozen=True)
class ControlPointSet:
    """Paired source fiducials p and moved targets q driving one deformation."""

    p: tuple[Point2, ...]
    q: tuple[Point2, ...]
    alpha: float = 1.0

    def __post_init__(self):
        p = tuple(Point2(float(pt[0]), float(pt[1])) for pt in self.p)
        q = tuple(Point2(float(pt[0]), float(pt[1])) for pt in self.q)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        if len(p) != len(q):
            raise LengthMismatch(f"control point lists differ in length: {len(p)} vs {len(q)}")
        if len(p) < 2:
            raise ValueError("at least 2 control points are required")
        for pt in p + q:
            if not (math.isfinite(pt.x) and math.isfinite(pt.y)):
                raise ValueError("control points must be finite")
        if len({(pt.x, pt.y) for pt in p}) != len(p):
            raise ValueError("duplicate source control points")
        if not (self.alpha > 0):
            raise ValueError("alpha must be > 0")

    def p_array(self) -> np.ndarray:
        return _as_xy_array(self.p, "p")

    def q_array(self) -> np.ndarray:
        return _as_xy_array(self.q, "q")


@dataclass(frozen=True)
class LocalTransform:
    """One solved transform: image of u is (u - p_star) . matrix + q_star."""

    matrix: np.ndarray  # (2, 2) float64
    p_star: Point2
    q_star: Point2


@dataclass(frozen=True)
class WarpGrid:
    """Backward-mapping lattice: src_coords[r, c] = source coordinate (x, y)
    in the input image for output lattice node (x = c*step, y = r*step).

    The lattice extends one node past the last pixel so every pixel of a
    width x height image lies inside a lattice cell.
    """

    width: int
    height: int
    step: int
    src_coords: np.ndarray  # (rows, cols, 2) float64

    @property
    def rows(self) -> int:
        return self.src_coords.shape[0]

    @property
    def cols(self) -> int:
        return self.src_coords.shape[1]


def weights(u, p: Sequence, alpha: float = 1.0) -> list[float]:
    """Inverse-distance weights of each control point for query u.

    w_i = 1 / |p_i - u|^(2 alpha). A control within COINCIDENCE_EPS of u gets
    math.inf, which downstream solvers treat as the exact-interpolation flag.
    """
    if not (alpha > 0):
        raise ValueError("alpha must be > 0")
    ux, uy = float(u[0]), float(u[1])
    out = []
    for pt in p:
        dx = float(pt[0]) - ux
        dy = float(pt[1]) - uy
        d2 = dx * dx + dy * dy
        if d2 <= COINCIDENCE_EPS * COINCIDENCE_EPS:
            out.append(math.inf)
        else:
            out.append(1.0 / d2**alpha)
    return out


def centroids(w: Sequence[float], p: Sequence, q: Sequence) -> tuple[Point2, Point2]:
    """Weight-normalized means of p and q. Weights must be finite here;
    coincident queries never reach this function."""
    if not (len(w) == len(p) == len(q)):
        raise LengthMismatch("weights and point lists must have equal length")
    wa = np.asarray(w, dtype=np.float64)
    total = float(wa.sum())
    if total == 0.0:
        raise ZeroWeightSum("weights sum to zero")
    pa = _as_xy_array(p, "p")
    qa = _as_xy_array(q, "q")
    ps = (wa[:, None] * pa).sum(axis=0) / total
    qs = (wa[:, None] * qa).sum(axis=0) / total
    return Point2(float(ps[0]), float(ps[1])), Point2(float(qs[0]), float(qs[1]))


def _solve_matrix(
    w: np.ndarray, phat: np.ndarray, qhat: np.ndarray, mode: DeformationMode
) -> np.ndarray:
    """Closed-form minimizer of sum w |phat M - qhat|^2 within the mode class."""
    if mode is DeformationMode.AFFINE:
        # 2x2 moment matrix inverted explicitly; relative determinant guards
        # collinear configurations.
        wp = w[:, None] * phat
        a00 = float((wp[:, 0] * phat[:, 0]).sum())
        a01 = float((wp[:, 0] * phat[:, 1]).sum())
        a11 = float((wp[:, 1] * phat[:, 1]).sum())
        b = wp.T @ qhat  # (2, 2)
        det = a00 * a11 - a01 * a01
        mu = a00 + a11
        if mu < DEGENERACY_EPS or abs(det) < DEGENERACY_EPS * mu * mu:
            raise DegenerateConfiguration("singular affine moment matrix")
        inv = np.array([[a11, -a01], [-a01, a00]], dtype=np.float64) / det
        return inv @ b

    mu = float((w * (phat * phat).sum(axis=1)).sum())
    if mu < DEGENERACY_EPS:
        raise DegenerateConfiguration("similarity normalizer below threshold")
    a = float((w * (phat * qhat).sum(axis=1)).sum()) / mu
    # <phat^perp, qhat> with perp (x,y) -> (-y,x)
    b = float((w * (phat[:, 0] * qhat[:, 1] - phat[:, 1] * qhat[:, 0])).sum()) / mu
    if mode is DeformationMode.RIGID:
        norm = math.hypot(a, b)
        if norm < DEGENERACY_EPS:
            raise DegenerateConfiguration("rigid rotation undefined (zero response)")
        a, b = a / norm, b / norm
    elif a == 0.0 and b == 0.0:
        raise DegenerateConfiguration("similarity response is zero")
    return np.array([[a, b], [-b, a]], dtype=np.float64)


def solve_transform(u, cps: ControlPointSet, mode: DeformationMode) -> LocalTransform:
    """Fit the local transform at query point u.

    Returns the exact-interpolation transform when u coincides with a control
    point: M = I anchored at (p_i, q_i), so T(u) = q_i + (u - p_i).
    """
    w = weights(u, cps.p, cps.alpha)
    for j, wj in enumerate(w):
        if math.isinf(wj):
            return LocalTransform(np.eye(2), cps.p[j], cps.q[j])
    p_star, q_star = centroids(w, cps.p, cps.q)
    pa = cps.p_array()
    qa = cps.q_array()
    wa = np.asarray(w, dtype=np.float64)
    phat = pa - np.array(p_star, dtype=np.float64)
    qhat = qa - np.array(q_star, dtype=np.float64)
    m = _solve_matrix(wa, phat, qhat, mode)
    return LocalTransform(m, p_star, q_star)


def apply_transform(u, t: LocalTransform) -> Point2:
    dx = float(u[0]) - t.p_star.x
    dy = float(u[1]) - t.p_star.y
    m = t.matrix
    return Point2(
        dx * m[0, 0] + dy * m[1, 0] + t.q_star.x,
        dx * m[0, 1] + dy * m[1, 1] + t.q_star.y,
    )


def map_points(
    points: np.ndarray,
    src: np.ndarray,
    dst: np.ndarray,
    alpha: float,
    mode: DeformationMode,
) -> np.ndarray:
    """Vectorized T(u) for many query points at once.

    points: (M, 2); src/dst: (K, 2) control sources/targets. Returns (M, 2).
    Matches solve_transform/apply_transform exactly, including the coincidence
    branch. Shared by grid construction and by the exact per-pixel oracle.
    """
    pts = np.asarray(points, dtype=np.float64)
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    m = pts.shape[0]
    diff = pts[:, None, :] - src[None, :, :]  # (M, K, 2)
    d2 = (diff * diff).sum(axis=2)  # (M, K)
    coincident = d2 <= COINCIDENCE_EPS * COINCIDENCE_EPS

    safe_d2 = np.where(coincident, 1.0, d2)
    w = 1.0 / safe_d2**alpha
    w = np.where(coincident, 0.0, w)  # coincident rows are overwritten below

    wsum = w.sum(axis=1)
    has_coin = coincident.any(axis=1)
    if (~has_coin & (wsum == 0.0)).any():
        raise ZeroWeightSum("weights sum to zero")
    wsum_safe = np.where(wsum == 0.0, 1.0, wsum)

    p_star = (w @ src) / wsum_safe[:, None]  # (M, 2)
    q_star = (w @ dst) / wsum_safe[:, None]
    phat = src[None, :, :] - p_star[:, None, :]  # (M, K, 2)
    qhat = dst[None, :, :] - q_star[:, None, :]

    out = np.empty((m, 2), dtype=np.float64)
    rel = pts - p_star  # (M, 2)

    if mode is DeformationMode.AFFINE:
        wp = w[:, :, None] * phat
        a00 = (wp[:, :, 0] * phat[:, :, 0]).sum(axis=1)
        a01 = (wp[:, :, 0] * phat[:, :, 1]).sum(axis=1)
        a11 = (wp[:, :, 1] * phat[:, :, 1]).sum(axis=1)
        b00 = (wp[:, :, 0] * qhat[:, :, 0]).sum(axis=1)
        b01 = (wp[:, :, 0] * qhat[:, :, 1]).sum(axis=1)
        b10 = (wp[:, :, 1] * qhat[:, :, 0]).sum(axis=1)
        b11 = (wp[:, :, 1] * qhat[:, :, 1]).sum(axis=1)
        det = a00 * a11 - a01 * a01
        mu = a00 + a11
        bad = ~has_coin & ((mu < DEGENERACY_EPS) | (np.abs(det) < DEGENERACY_EPS * mu * mu))
        if bad.any():
            raise DegenerateConfiguration("singular affine moment matrix")
        det_safe = np.where(det == 0.0, 1.0, det)
        # inv(A) @ B, written out per entry
        m00 = (a11 * b00 - a01 * b10) / det_safe
        m01 = (a11 * b01 - a01 * b11) / det_safe
        m10 = (-a01 * b00 + a00 * b10) / det_safe
        m11 = (-a01 * b01 + a00 * b11) / det_safe
        out[:, 0] = rel[:, 0] * m00 + rel[:, 1] * m10 + q_star[:, 0]
        out[:, 1] = rel[:, 0] * m01 + rel[:, 1] * m11 + q_star[:, 1]
    else:
        mu = (w * (phat * phat).sum(axis=2)).sum(axis=1)
        bad = ~has_coin & (mu < DEGENERACY_EPS)
        if bad.any():
            raise DegenerateConfiguration("similarity normalizer below threshold")
        mu_safe = np.where(mu == 0.0, 1.0, mu)
        a = (w * (phat * qhat).sum(axis=2)).sum(axis=1) / mu_safe
        b = (w * (phat[:, :, 0] * qhat[:, :, 1] - phat[:, :, 1] * qhat[:, :, 0])).sum(
            axis=1
        ) / mu_safe
        if mode is DeformationMode.RIGID:
            norm = np.hypot(a, b)
            bad = ~has_coin & (norm < DEGENERACY_EPS)
            if bad.any():
                raise DegenerateConfiguration("rigid rotation undefined (zero response)")
            norm_safe = np.where(norm == 0.0, 1.0, norm)
            a, b = a / norm_safe, b / norm_safe
        else:
            bad = ~has_coin & (a == 0.0) & (b == 0.0)
            if bad.any():
                raise DegenerateConfiguration("similarity response is zero")
        # (u - p*) . [[a, b], [-b, a]] + q*
        out[:, 0] = rel[:, 0] * a - rel[:, 1] * b + q_star[:, 0]
        out[:, 1] = rel[:, 0] * b + rel[:, 1] * a + q_star[:, 1]

    if has_coin.any():
        idx = np.nonzero(has_coin)[0]
        first = np.argmax(coincident[idx], axis=1)
        # T(u) = dst_j + (u - src_j); exact interpolation at the control
        out[idx] = dst[first] + (pts[idx] - src[first])
    return out


def build_warp_grid(
    width: int,
    height: int,
    cps: ControlPointSet,
    mode: DeformationMode,
    step: int = 4,
) -> WarpGrid:
    """Solve the backward map on a coarse lattice over the output image.

    Roles are swapped on purpose: the lattice is solved with sources = q and
    targets = p, so src_coords tells each output node where to sample the
    input, realizing the forward deformation p -> q without holes.
    """
    width, height, step = int(width), int(height), int(step)
    if width < 2 or height < 2:
        raise InvalidDimensions(f"image must be at least 2x2, got {width}x{height}")
    if step < 1:
        raise InvalidDimensions(f"grid step must be >= 1, got {step}")
    rows = -(-height // step) + 1
    cols = -(-width // step) + 1
    ys = np.arange(rows, dtype=np.float64) * step
    xs = np.arange(cols, dtype=np.float64) * step
    nodes = np.stack(
        [np.repeat(xs[None, :], rows, axis=0), np.repeat(ys[:, None], cols, axis=1)],
        axis=2,
    ).reshape(-1, 2)
    mapped = map_points(nodes, cps.q_array(), cps.p_array(), cps.alpha, mode)
    if not np.isfinite(mapped).all():
        raise DegenerateConfiguration("warp grid produced non-finite coordinates")
    return WarpGrid(width, height, step, mapped.reshape(rows, cols, 2))


def _interp_grid(grid: WarpGrid) -> tuple[np.ndarray, np.ndarray]:
    """Bilinearly interpolate lattice src_coords at every pixel center."""
    h, w, step = grid.height, grid.width, grid.step
    g = grid.src_coords
    ys = np.arange(h, dtype=np.float64) / step
    xs = np.arange(w, dtype=np.float64) / step
    r0 = np.minimum(ys.astype(np.int64), grid.rows - 2)
    c0 = np.minimum(xs.astype(np.int64), grid.cols - 2)
    fy = (ys - r0)[:, None, None]
    fx = (xs - c0)[None, :, None]
    g00 = g[r0][:, c0]
    g01 = g[r0][:, c0 + 1]
    g10 = g[r0 + 1][:, c0]
    g11 = g[r0 + 1][:, c0 + 1]
    src = (
        g00 * (1 - fy) * (1 - fx)
        + g01 * (1 - fy) * fx
        + g10 * fy * (1 - fx)
        + g11 * fy * fx
    )
    return src[:, :, 0], src[:, :, 1]


def _fill_values(fill: FillRule, channels: int) -> np.ndarray:
    vals = fill.value
    if len(vals) == 1:
        vals = vals * channels
    if len(vals) != channels:
        raise ValueError(
            f"constant fill has {len(fill.value)} values for a {channels}-channel image"
        )
    return np.asarray(vals, dtype=np.float64)


def warp_image(img: np.ndarray, grid: WarpGrid, fill: FillRule = REPLICATE) -> np.ndarray:
    """Backward-warp an 8-bit image through the grid.

    Source coordinates are bilinearly interpolated from the lattice, then the
    image is bilinearly sampled at them. Out-of-bounds samples follow the
    fill rule. Output is quantized round-half-up to uint8.
    """
    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 image, got {arr.dtype}")
    if arr.ndim == 2:
        flat = arr[:, :, None]
    elif arr.ndim == 3:
        flat = arr
    else:
        raise ValueError(f"expected 2D or 3D image array, got shape {arr.shape}")
    h, w, ch = flat.shape
    if h != grid.height or w != grid.width:
        raise DimensionMismatch(
            f"image is {w}x{h} but grid was built for {grid.width}x{grid.height}"
        )

    sx, sy = _interp_grid(grid)

    if fill.kind == FillRule.REPLICATE_KIND:
        sx = np.clip(sx, 0.0, w - 1.0)
        sy = np.clip(sy, 0.0, h - 1.0)
        x0 = np.minimum(sx.astype(np.int64), w - 2)
        y0 = np.minimum(sy.astype(np.int64), h - 2)
        tx = (sx - x0)[:, :, None]
        ty = (sy - y0)[:, :, None]
        v00 = flat[y0, x0].astype(np.float64)
        v01 = flat[y0, x0 + 1].astype(np.float64)
        v10 = flat[y0 + 1, x0].astype(np.float64)
        v11 = flat[y0 + 1, x0 + 1].astype(np.float64)
    else:
        const = _fill_values(fill, ch)
        # Clamp far-away coordinates first so the int cast cannot overflow;
        # anything at least 1 px outside stays outside after clamping.
        sx = np.clip(sx, -2.0, w + 1.0)
        sy = np.clip(sy, -2.0, h + 1.0)
        x0 = np.floor(sx).astype(np.int64)
        y0 = np.floor(sy).astype(np.int64)
        tx = (sx - x0)[:, :, None]
        ty = (sy - y0)[:, :, None]

        def corner(yy, xx):
            valid = (yy >= 0) & (yy <= h - 1) & (xx >= 0) & (xx <= w - 1)
            vc = flat[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)].astype(np.float64)
            return np.where(valid[:, :, None], vc, const[None, None, :])

        v00 = corner(y0, x0)
        v01 = corner(y0, x0 + 1)
        v10 = corner(y0 + 1, x0)
        v11 = corner(y0 + 1, x0 + 1)

    val = (
        v00 * (1 - ty) * (1 - tx)
        + v01 * (1 - ty) * tx
        + v10 * ty * (1 - tx)
        + v11 * ty * tx
    )
    out = np.clip(np.floor(val + 0.5), 0.0, 255.0).astype(np.uint8)
    return out[:, :, 0] if arr.ndim == 2 else out

"""Bilinear sampling, warping, scale transforms, and resizing of rank-2 grids."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ShapeError
from .grid import BorderPolicy, as_grid


@dataclass(frozen=True)
class PixelMapping:
    """Closed-form map from an output pixel (x, y) to source coordinates.

    ``fn`` receives broadcastable arrays of x (column) and y (row)
    coordinates and returns the source (x, y) arrays. The map must be total
    on the output domain; coordinates falling outside the source grid are
    handled by the border policy at sampling time.
    """

    fn: Callable[[np.ndarray, np.ndarray], tuple]

    def __call__(self, xs, ys):
        return self.fn(xs, ys)

    @staticmethod
    def identity() -> "PixelMapping":
        return PixelMapping(lambda xs, ys: (xs, ys))

    @staticmethod
    def shift(dx: float, dy: float) -> "PixelMapping":
        """Move content by (+dx, +dy): output(x, y) samples image(x - dx, y - dy)."""
        return PixelMapping(lambda xs, ys: (xs - dx, ys - dy))

    @staticmethod
    def scale_about(s: float, cx: float, cy: float) -> "PixelMapping":
        """The scale transform T_s about (cx, cy); s > 1 magnifies."""
        return PixelMapping(lambda xs, ys: (cx + (xs - cx) / s, cy + (ys - cy) / s))


def sample_at(image, xs, ys, border: BorderPolicy = BorderPolicy.CLAMP) -> np.ndarray:
    """Bilinearly sample ``image`` at real-valued (x=col, y=row) coordinate arrays."""
    image = as_grid(image, rank=2, name="image")
    border = BorderPolicy.coerce(border)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
        raise ValueError("sample coordinates must be finite")
    x0f = np.floor(xs)
    y0f = np.floor(ys)
    fx = xs - x0f
    fy = ys - y0f
    x0 = x0f.astype(np.int64)
    y0 = y0f.astype(np.int64)
    v00 = _gather(image, y0, x0, border)
    v01 = _gather(image, y0, x0 + 1, border)
    v10 = _gather(image, y0 + 1, x0, border)
    v11 = _gather(image, y0 + 1, x0 + 1, border)
    top = (1.0 - fx) * v00 + fx * v01
    bottom = (1.0 - fx) * v10 + fx * v11
    return (1.0 - fy) * top + fy * bottom


def _gather(image, rows, cols, border):
    h, w = image.shape
    if border is BorderPolicy.CIRCULAR:
        return image[rows % h, cols % w]
    vals = image[np.clip(rows, 0, h - 1), np.clip(cols, 0, w - 1)]
    if border is BorderPolicy.CLAMP:
        return vals
    inside = (rows >= 0) & (rows < h) & (cols >= 0) & (cols < w)
    return np.where(inside, vals, 0.0)


def bilinear_sample(image, x: float, y: float, border: BorderPolicy = BorderPolicy.CLAMP) -> float:
    """Bilinear interpolation of the four neighbors of (x, y)."""
    return float(sample_at(image, x, y, border))


def warp(
    image,
    mapping: PixelMapping,
    border: BorderPolicy = BorderPolicy.CLAMP,
    out_shape: tuple | None = None,
) -> np.ndarray:
    """Inverse-mapping resampler: output(x, y) = sample(image, mapping(x, y))."""
    image = as_grid(image, rank=2, name="image")
    h, w = out_shape if out_shape is not None else image.shape
    ys, xs = np.meshgrid(
        np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij"
    )
    sx, sy = mapping(xs, ys)
    return sample_at(image, sx, sy, border)


def scale_transform(
    image,
    s: float,
    center: tuple | None = None,
    border: BorderPolicy = BorderPolicy.CLAMP,
) -> np.ndarray:
    """Scale transform T_s about ``center`` given as (row, col).

    output(y, x) = image(cy + (y - cy)/s, cx + (x - cx)/s); s > 1 magnifies,
    s < 1 shrinks. The default center is the exact image center. T_1 returns
    a bit-exact copy.
    """
    image = as_grid(image, rank=2, name="image")
    if not np.isfinite(s) or s <= 0:
        raise ValueError(f"scale factor must be positive and finite, got {s}")
    if s == 1.0:
        return image.copy()
    if center is None:
        cy, cx = (image.shape[0] - 1) / 2.0, (image.shape[1] - 1) / 2.0
    else:
        cy, cx = float(center[0]), float(center[1])
    return warp(image, PixelMapping.scale_about(s, cx, cy), border)


def scale_transform_stack(
    stack,
    s: float,
    center: tuple | None = None,
    border: BorderPolicy = BorderPolicy.CLAMP,
) -> np.ndarray:
    """Apply ``scale_transform`` over the trailing two axes of a rank >= 2 grid."""
    stack = as_grid(stack, name="stack")
    if stack.ndim == 2:
        return scale_transform(stack, s, center, border)
    lead = stack.shape[:-2]
    flat = stack.reshape(-1, *stack.shape[-2:])
    out = np.stack([scale_transform(ch, s, center, border) for ch in flat])
    return out.reshape(*lead, *stack.shape[-2:])


def resize(
    image, out_h: int, out_w: int, border: BorderPolicy = BorderPolicy.CLAMP
) -> np.ndarray:
    """Bilinear resize with endpoint-aligned sampling."""
    image = as_grid(image, rank=2, name="image")
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"resize target must be positive, got {out_h}x{out_w}")
    h, w = image.shape
    ys = (
        np.arange(out_h, dtype=np.float64) * ((h - 1) / (out_h - 1))
        if out_h > 1
        else np.full(1, (h - 1) / 2.0)
    )
    xs = (
        np.arange(out_w, dtype=np.float64) * ((w - 1) / (out_w - 1))
        if out_w > 1
        else np.full(1, (w - 1) / 2.0)
    )
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return sample_at(image, xx, yy, border)

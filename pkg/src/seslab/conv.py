"""Dense 2D convolution (correlation semantics) over multi-channel grids."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError
from .grid import BorderPolicy, as_grid, pad_mode


def conv2d(
    image: np.ndarray,
    kernels: np.ndarray,
    border: BorderPolicy = BorderPolicy.ZERO,
) -> np.ndarray:
    """Correlate a [C, H, W] grid with a [O, C, k, k] kernel stack.

    Stride is 1 and the spatial output size equals the input size ("same"
    output under the border policy). No kernel flip is applied:

        out[o, u, v] = sum_{c,i,j} image[c, u+i-k//2, v+j-k//2] * kernels[o, c, i, j]

    The kernel extent k must be odd and the input channel count must match
    the kernels' channel dimension.
    """
    image = as_grid(image, rank=3, name="input")
    kernels = as_grid(kernels, rank=4, name="kernels")
    out_ch, in_ch, kh, kw = kernels.shape
    if kh != kw:
        raise ShapeError(f"kernels must be square, got {kh}x{kw}")
    if kh % 2 == 0:
        raise ShapeError(f"kernel extent must be odd, got {kh}")
    if image.shape[0] != in_ch:
        raise ShapeError(
            f"channel mismatch: input has {image.shape[0]} channels, "
            f"kernels expect {in_ch}"
        )
    border = BorderPolicy.coerce(border)
    half = kh // 2
    padded = pad2d(image, half, border)
    h, w = image.shape[1], image.shape[2]
    out = np.zeros((out_ch, h, w))
    # One [O,C] x [C,H*W] contraction per kernel offset keeps memory flat and
    # fixes the accumulation order independently of caller-side threading.
    for i in range(kh):
        for j in range(kw):
            out += np.tensordot(
                kernels[:, :, i, j], padded[:, i : i + h, j : j + w], axes=(1, 0)
            )
    return out


def pad2d(image: np.ndarray, margin: int, border: BorderPolicy) -> np.ndarray:
    """Pad the trailing two axes by ``margin`` on each side."""
    if margin == 0:
        return image
    spec = [(0, 0)] * (image.ndim - 2) + [(margin, margin), (margin, margin)]
    if BorderPolicy.coerce(border) is BorderPolicy.ZERO:
        return np.pad(image, spec, mode="constant", constant_values=0.0)
    return np.pad(image, spec, mode=pad_mode(border))

"""Scale-equivariant steerable convolution layers and comparison stacks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .basis import ScaleSet, SteerableBasis, build_basis, scale_set_from_alpha
from .conv import conv2d
from .errors import ConfigError, SeslabError, ShapeError
from .grid import BorderPolicy, as_grid
from .resample import scale_transform, scale_transform_stack

KINDS = ("ses", "vanilla")
NONLINEARITIES = ("relu", "none")

# Canonical scale sets top out at sigma = 1, which is badly undersampled on
# an integer grid. Banks therefore stretch every sigma by a shared base
# width; the sigma_i / sigma_j ratios that drive the equivariance identity
# are unchanged.
DEFAULT_BASE_SIGMA = 2.8


@dataclass(frozen=True)
class SesFilterBank:
    """Trainable coefficients plus the kernels synthesized per basis scale.

    kernels[s] = scale_gains[s] * sum_b weights[..., b] * basis.filters[s, b].
    The shared coefficient tensor makes the trainable parameter count
    independent of the number of scales. Plain banks use unit gains; stacks
    use gains sigma_top / sigma_s, which restores the analytic 1/sigma^2
    cross-scale amplitude law on top of the unit-l2 stored filters and turns
    the matched-scale convolution identity into its clean, factor-free form.
    """

    weights: np.ndarray  # [O, C, num_basis]
    basis: SteerableBasis
    kernels: np.ndarray  # [S, O, C, k, k]
    scale_gains: tuple | None = None

    @property
    def num_scales(self) -> int:
        return self.kernels.shape[0]

    @property
    def out_channels(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    def sigma(self, index: int) -> float:
        return self.basis.sigmas.sigmas[index]

    def gain(self, index: int) -> float:
        return self.scale_gains[index % self.num_scales]


def paper_scale_gains(sigmas) -> tuple:
    """Per-scale kernel gains sigma_top / sigma_s (largest scale anchored at 1)."""
    top = sigmas.sigmas[-1]
    return tuple(top / s for s in sigmas.sigmas)


def combine(weights, basis: SteerableBasis, scale_gains=None) -> SesFilterBank:
    """Synthesize and cache per-scale kernels from coefficients and a basis."""
    weights = as_grid(weights, rank=3, name="weights")
    if weights.shape[2] != basis.num_basis:
        raise ShapeError(
            f"weights address {weights.shape[2]} basis members, "
            f"basis has {basis.num_basis}"
        )
    if scale_gains is None:
        gains = (1.0,) * basis.num_scales
    else:
        gains = tuple(float(g) for g in scale_gains)
        if len(gains) != basis.num_scales:
            raise ShapeError(
                f"{len(gains)} scale gains for {basis.num_scales} basis scales"
            )
    kernels = np.einsum(
        "s,ocb,sbij->socij", np.asarray(gains), weights, basis.filters
    )
    weights = weights.copy()
    weights.setflags(write=False)
    kernels.setflags(write=False)
    return SesFilterBank(
        weights=weights, basis=basis, kernels=kernels, scale_gains=gains
    )


def ses_conv_input(image, bank: SesFilterBank, border: BorderPolicy = BorderPolicy.ZERO):
    """Convolve a [C, H, W] grid once per scale, stacking along a new scale axis."""
    image = as_grid(image, rank=3, name="input")
    return np.stack(
        [conv2d(image, bank.kernels[si], border) for si in range(bank.num_scales)]
    )


def ses_conv_scalewise(x, bank: SesFilterBank, border: BorderPolicy = BorderPolicy.ZERO):
    """Convolve each scale slice of a [S, C, H, W] map with its own-scale kernel.

    The inter-scale kernel extent is 1: no scale mixing happens inside the
    convolution.
    """
    x = as_grid(x, rank=4, name="features")
    if x.shape[0] != bank.num_scales:
        raise ShapeError(
            f"feature map has {x.shape[0]} scales, bank has {bank.num_scales}"
        )
    return np.stack(
        [conv2d(x[si], bank.kernels[si], border) for si in range(bank.num_scales)]
    )


def scale_projection(x) -> np.ndarray:
    """Elementwise max over the scale axis: [S, C, H, W] -> [C, H, W]."""
    x = as_grid(x, rank=4, name="features")
    return x.max(axis=0)


def se_pool(x, window: int, mode: str = "max") -> np.ndarray:
    """Spatial pooling applied per scale slice; the scale axis is untouched.

    Non-divisible extents are clamp-padded (edge replication) up to the next
    window multiple.
    """
    x = as_grid(x, rank=4, name="features")
    if window < 1:
        raise ValueError(f"pool window must be >= 1, got {window}")
    if mode not in ("max", "avg"):
        raise ValueError(f"pool mode must be 'max' or 'avg', got {mode!r}")
    if window == 1:
        return x.copy()
    s, c, h, w = x.shape
    pad_h = (-h) % window
    pad_w = (-w) % window
    if pad_h or pad_w:
        x = np.pad(x, ((0, 0), (0, 0), (0, pad_h), (0, pad_w)), mode="edge")
    hb = (h + pad_h) // window
    wb = (w + pad_w) // window
    blocks = x.reshape(s, c, hb, window, wb, window)
    if mode == "max":
        return blocks.max(axis=(3, 5))
    return blocks.mean(axis=(3, 5))


def _exact_mean_var(values: np.ndarray) -> tuple:
    # Exact two-pass statistics: fsum makes the result a function of the
    # value multiset only, so normalization commutes bit-for-bit with
    # circular spatial shifts.
    flat = np.ascontiguousarray(values).ravel()
    mean = math.fsum(flat.tolist()) / flat.size
    centered = flat - mean
    var = math.fsum((centered * centered).tolist()) / flat.size
    return mean, var


def se_norm(x, epsilon: float = 1e-5) -> np.ndarray:
    """Forward-only 3D normalization: per channel across (scale, H, W)."""
    x = as_grid(x, rank=4, name="features")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    out = np.empty_like(x)
    for c in range(x.shape[1]):
        mean, var = _exact_mean_var(x[:, c])
        out[:, c] = (x[:, c] - mean) / math.sqrt(var + epsilon)
    return out


def norm2d(x, epsilon: float = 1e-5) -> np.ndarray:
    """Vanilla counterpart of :func:`se_norm`: per channel across (H, W)."""
    x = as_grid(x, rank=3, name="features")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    out = np.empty_like(x)
    for c in range(x.shape[0]):
        mean, var = _exact_mean_var(x[c])
        out[c] = (x[c] - mean) / math.sqrt(var + epsilon)
    return out


def relu(x) -> np.ndarray:
    return np.maximum(x, 0.0)


@dataclass(frozen=True)
class LayerSpec:
    out_channels: int
    k: int = 7
    nonlinearity: str = "relu"

    def __post_init__(self):
        if self.out_channels < 1:
            raise ConfigError(f"out_channels must be >= 1, got {self.out_channels}")
        if self.k < 1 or self.k % 2 == 0:
            raise ConfigError(f"layer kernel extent must be odd, got {self.k}")
        if self.nonlinearity not in NONLINEARITIES:
            raise ConfigError(
                f"nonlinearity must be one of {NONLINEARITIES}, got {self.nonlinearity!r}"
            )


@dataclass(frozen=True)
class StackSpec:
    """Description of a small comparison stack.

    Both kinds draw identical seed-derived coefficients; the vanilla variant
    runs plain 2D convolutions with the largest-scale kernels, so any
    equivariance gap between the two is architectural rather than an
    initialization artifact. The first layer consumes the raw image; each
    later layer applies normalization, its own nonlinearity, then its
    convolution. Reported block outputs are the per-layer convolution
    results (scale-projected for the ses kind).
    """

    kind: str = "ses"
    layers: tuple = (LayerSpec(4, 11), LayerSpec(4, 11), LayerSpec(4, 11), LayerSpec(4, 11))
    alpha: float = 0.1
    num_scales: int = 3
    seed: int = 0
    base_sigma: float = DEFAULT_BASE_SIGMA
    max_order: int = 3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"stack kind must be one of {KINDS}, got {self.kind!r}")
        layers = tuple(
            layer if isinstance(layer, LayerSpec) else LayerSpec(**layer)
            for layer in self.layers
        )
        if not layers:
            raise ConfigError("stack needs at least one layer")
        object.__setattr__(self, "layers", layers)
        if self.base_sigma <= 0:
            raise ConfigError(f"base_sigma must be positive, got {self.base_sigma}")
        if self.max_order < 0:
            raise ConfigError(f"max_order must be >= 0, got {self.max_order}")
        for layer in layers:
            if (self.max_order + 1) ** 2 > layer.k * layer.k:
                raise ConfigError(
                    f"max_order {self.max_order} needs more than {layer.k}x{layer.k} "
                    f"pixels per filter"
                )
        scale_set_from_alpha(self.alpha, self.num_scales)  # validates both

    def scale_set(self) -> ScaleSet:
        return scale_set_from_alpha(self.alpha, self.num_scales).scaled(self.base_sigma)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "layers": [
                {"out_channels": l.out_channels, "k": l.k, "nonlinearity": l.nonlinearity}
                for l in self.layers
            ],
            "alpha": self.alpha,
            "num_scales": self.num_scales,
            "seed": self.seed,
            "base_sigma": self.base_sigma,
            "max_order": self.max_order,
        }

    @staticmethod
    def from_dict(data: dict) -> "StackSpec":
        known = {"kind", "layers", "alpha", "num_scales", "seed", "base_sigma", "max_order"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown stack spec fields: {sorted(unknown)}")
        spec = dict(data)
        if "layers" in spec:
            spec["layers"] = tuple(spec["layers"])
        return StackSpec(**spec)

    @staticmethod
    def from_json(text: str) -> "StackSpec":
        return StackSpec.from_dict(json.loads(text))


CALIBRATION_SIZE = 96


@dataclass(frozen=True)
class Stack:
    """An immutable stack of banks; forward passes are pure.

    Normalization layers run inference-style: their per-channel statistics
    are frozen at build time (calibrated once on a seed-derived probe
    image), so each norm is a fixed affine map. Per-input statistics would
    make the normalization itself scale-sensitive and mask the
    convolutional equivariance the harness measures.
    """

    spec: StackSpec
    banks: tuple
    norm_stats: tuple  # per layer >= 2: (mean[C], var[C])
    border: BorderPolicy = BorderPolicy.ZERO

    @property
    def kind(self) -> str:
        return self.spec.kind

    @property
    def num_blocks(self) -> int:
        return len(self.banks)

    @property
    def weight_count(self) -> int:
        return sum(b.weights.size for b in self.banks)

    def forward(self, image) -> list:
        """Per-block [C, H, W] activations for a rank-2 image."""
        image = as_grid(image, rank=2, name="image")
        blocks = []
        if self.spec.kind == "ses":
            x = ses_conv_input(image[np.newaxis], self.banks[0], self.border)
            blocks.append(scale_projection(x))
            for bank, layer, stats in zip(
                self.banks[1:], self.spec.layers[1:], self.norm_stats
            ):
                x = _affine_norm(x, stats, channel_axis=1)
                if layer.nonlinearity == "relu":
                    x = relu(x)
                x = ses_conv_scalewise(x, bank, self.border)
                blocks.append(scale_projection(x))
        else:
            x = conv2d(image[np.newaxis], self.banks[0].kernels[-1], self.border)
            blocks.append(x)
            for bank, layer, stats in zip(
                self.banks[1:], self.spec.layers[1:], self.norm_stats
            ):
                x = _affine_norm(x, stats, channel_axis=0)
                if layer.nonlinearity == "relu":
                    x = relu(x)
                x = conv2d(x, bank.kernels[-1], self.border)
                blocks.append(x)
        return blocks


def _affine_norm(x, stats, channel_axis, epsilon=1e-5):
    mean, var = stats
    shape = [1] * x.ndim
    shape[channel_axis] = x.shape[channel_axis]
    return (x - mean.reshape(shape)) / np.sqrt(var + epsilon).reshape(shape)


def _channel_stats(x, channel_axis):
    channels = x.shape[channel_axis]
    mean = np.empty(channels)
    var = np.empty(channels)
    for c in range(channels):
        sl = np.take(x, c, axis=channel_axis)
        mean[c], var[c] = _exact_mean_var(sl)
    return mean, var


def _calibrate_norm_stats(spec: StackSpec, banks, border) -> tuple:
    """Frozen normalization statistics from one probe forward pass.

    The probe is derived from the stack seed, so both kinds of a shared
    spec see the same probe and stay comparable.
    """
    if len(banks) == 1:
        return ()
    from .synth import synth_image

    probe = synth_image(
        "gaussian-blobs", CALIBRATION_SIZE, CALIBRATION_SIZE, seed=spec.seed
    )
    stats = []
    if spec.kind == "ses":
        x = ses_conv_input(probe[np.newaxis], banks[0], border)
        for bank, layer in zip(banks[1:], spec.layers[1:]):
            stats.append(_channel_stats(x, channel_axis=1))
            x = _affine_norm(x, stats[-1], channel_axis=1)
            if layer.nonlinearity == "relu":
                x = relu(x)
            x = ses_conv_scalewise(x, bank, border)
    else:
        x = conv2d(probe[np.newaxis], banks[0].kernels[-1], border)
        for bank, layer in zip(banks[1:], spec.layers[1:]):
            stats.append(_channel_stats(x, channel_axis=0))
            x = _affine_norm(x, stats[-1], channel_axis=0)
            if layer.nonlinearity == "relu":
                x = relu(x)
            x = conv2d(x, bank.kernels[-1], border)
    return tuple(stats)


def build_stack(spec: StackSpec, border: BorderPolicy = BorderPolicy.ZERO) -> Stack:
    """Build a stack with fan-in uniform weights, w ~ U[-a, a], a = 1/sqrt(C k^2)."""
    sigmas = spec.scale_set()
    rng = np.random.default_rng(spec.seed)
    basis_cache: dict = {}
    banks = []
    in_channels = 1
    for layer in spec.layers:
        basis = basis_cache.get(layer.k)
        if basis is None:
            basis = build_basis(sigmas, max_order=spec.max_order, k=layer.k)
            basis_cache[layer.k] = basis
        bound = 1.0 / math.sqrt(in_channels * layer.k * layer.k)
        weights = rng.uniform(
            -bound, bound, size=(layer.out_channels, in_channels, basis.num_basis)
        )
        banks.append(combine(weights, basis, scale_gains=paper_scale_gains(sigmas)))
        in_channels = layer.out_channels
    border = BorderPolicy.coerce(border)
    norm_stats = _calibrate_norm_stats(spec, tuple(banks), border)
    return Stack(spec=spec, banks=tuple(banks), norm_stats=norm_stats, border=border)


def _relative_l2(lhs: np.ndarray, rhs: np.ndarray, crop_margin: float) -> float:
    h, w = lhs.shape[-2:]
    my = int(round(h * crop_margin))
    mx = int(round(w * crop_margin))
    sl = (Ellipsis, slice(my, h - my), slice(mx, w - mx))
    diff = lhs[sl] - rhs[sl]
    denom = float(np.linalg.norm(rhs[sl]))
    if denom == 0.0:
        raise SeslabError("relative residue undefined: reference signal is zero")
    return float(np.linalg.norm(diff)) / denom


def scale_matched_residue(
    bank: SesFilterBank,
    image,
    scale_i: int,
    scale_j: int,
    border: BorderPolicy = BorderPolicy.ZERO,
    crop_margin: float = 0.15,
) -> float:
    """Relative l2 residue of the matched-kernel scale identity.

    The continuous identity for the analytic filter family is

        conv(T_s h, K_i) = amp * T_s conv(h, K_j),   s = sigma_i / sigma_j,

    where amp = s * gain_i / gain_j accounts for the bank's cross-scale
    amplitude convention: amp = 1 for banks built with the analytic
    1/sigma^2 gains (stacks) and amp = s for plain unit-l2 banks. Borders
    are cropped by ``crop_margin`` per side before comparing.
    """
    image = as_grid(image, rank=2, name="image")
    s = bank.sigma(scale_i) / bank.sigma(scale_j)
    amp = s * bank.gain(scale_i) / bank.gain(scale_j)
    scaled = scale_transform(image, s)
    lhs = conv2d(scaled[np.newaxis], bank.kernels[scale_i], border)
    ref = conv2d(image[np.newaxis], bank.kernels[scale_j], border)
    rhs = amp * scale_transform_stack(ref, s)
    return _relative_l2(lhs, rhs, crop_margin)


def single_scale_residue(
    bank: SesFilterBank,
    image,
    s: float,
    scale_index: int = -1,
    border: BorderPolicy = BorderPolicy.ZERO,
    crop_margin: float = 0.15,
) -> float:
    """The same measurement when the kernel cannot follow the image scaling.

    A single-scale (vanilla) layer claims conv(T_s h, K) = T_s conv(h, K);
    the returned residue is the relative l2 failure of that claim.
    """
    image = as_grid(image, rank=2, name="image")
    kernels = bank.kernels[scale_index]
    lhs = conv2d(scale_transform(image, s)[np.newaxis], kernels, border)
    rhs = scale_transform_stack(conv2d(image[np.newaxis], kernels, border), s)
    return _relative_l2(lhs, rhs, crop_margin)

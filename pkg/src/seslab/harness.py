"""Equivariance-error measurement of stacks over image corpora.

The measurement compares, per block and per scale factor, the scaled
feature map against the feature map of the scaled image, normalized by the
scaled feature energy. The ses and vanilla stacks are built from identical
seed-derived coefficients so the comparison isolates the architecture.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, SeslabError
from .fileio import read_pgm
from .grid import BorderPolicy, as_grid
from .resample import scale_transform, scale_transform_stack
from .sesconv import Stack, StackSpec, build_stack
from .synth import synth_corpus

THREADS_ENV = "SESLAB_THREADS"
REPORT_KINDS = ("ses", "vanilla")
CSV_HEADER = "kind,block,scale,delta,log10_delta,n"


def thread_count() -> int:
    raw = os.environ.get(THREADS_ENV, "1").strip() or "1"
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, value)


@dataclass(frozen=True)
class CorpusSpec:
    """Synthetic corpus parameters, or a directory of flat PGM images."""

    kind: str = "gaussian-blobs"
    count: int = 20
    height: int = 96
    width: int = 320
    seed: int = 0
    image_dir: str | None = None

    def __post_init__(self):
        if self.image_dir is None and self.count < 1:
            raise ConfigError(f"corpus count must be >= 1, got {self.count}")

    def load(self) -> list:
        if self.image_dir is not None:
            paths = sorted(Path(self.image_dir).glob("*.pgm"))
            if not paths:
                raise ConfigError(f"no .pgm images found in {self.image_dir}")
            return [read_pgm(p) for p in paths]
        return synth_corpus(self.kind, self.count, self.height, self.width, self.seed)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "count": self.count,
            "height": self.height,
            "width": self.width,
            "seed": self.seed,
            "image_dir": self.image_dir,
        }


@dataclass(frozen=True)
class EquivConfig:
    """Full experiment description; deterministic given its values."""

    stack: StackSpec = StackSpec()
    corpus: CorpusSpec = CorpusSpec()
    scale_factors: tuple = (1.0 / 1.2, 1.0 / 1.1, 0.8, 0.7, 0.6)
    blocks: tuple = (1, 2, 3, 4)
    crop_margin: float = 0.1

    def __post_init__(self):
        factors = tuple(float(s) for s in self.scale_factors)
        if not factors:
            raise ConfigError("at least one scale factor is required")
        if any(not 0.0 < s <= 1.0 for s in factors):
            raise ConfigError(f"scale factors must lie in (0, 1], got {factors}")
        object.__setattr__(self, "scale_factors", factors)
        blocks = tuple(int(b) for b in self.blocks)
        if not blocks:
            raise ConfigError("at least one block index is required")
        if any(not 1 <= b <= len(self.stack.layers) for b in blocks):
            raise ConfigError(
                f"block indices must lie in 1..{len(self.stack.layers)}, got {blocks}"
            )
        object.__setattr__(self, "blocks", blocks)
        if not 0.0 <= self.crop_margin < 0.5:
            raise ConfigError(f"crop margin must lie in [0, 0.5), got {self.crop_margin}")

    def to_dict(self) -> dict:
        return {
            "stack": self.stack.to_dict(),
            "corpus": self.corpus.to_dict(),
            "scale_factors": list(self.scale_factors),
            "blocks": list(self.blocks),
            "crop_margin": self.crop_margin,
        }

    @staticmethod
    def from_dict(data: dict) -> "EquivConfig":
        known = {"stack", "corpus", "scale_factors", "blocks", "crop_margin"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown equiv config fields: {sorted(unknown)}")
        kwargs = dict(data)
        if "stack" in kwargs:
            kwargs["stack"] = StackSpec.from_dict(kwargs["stack"])
        if "corpus" in kwargs:
            kwargs["corpus"] = CorpusSpec(**kwargs["corpus"])
        if "scale_factors" in kwargs:
            kwargs["scale_factors"] = tuple(kwargs["scale_factors"])
        if "blocks" in kwargs:
            kwargs["blocks"] = tuple(kwargs["blocks"])
        return EquivConfig(**kwargs)

    @staticmethod
    def from_json(text: str) -> "EquivConfig":
        return EquivConfig.from_dict(json.loads(text))


@dataclass(frozen=True)
class ReportRow:
    kind: str
    block: int
    scale: float
    delta: float
    log10_delta: float
    n: int


@dataclass(frozen=True)
class EquivReport:
    rows: tuple
    metadata: dict

    def to_csv_text(self) -> str:
        lines = [CSV_HEADER]
        for r in self.rows:
            lines.append(
                f"{r.kind},{r.block},{_fmt(r.scale)},{_fmt(r.delta)},"
                f"{_fmt(r.log10_delta)},{r.n}"
            )
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv_text())

    def to_json_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "rows": [
                {
                    "kind": r.kind,
                    "block": r.block,
                    "scale": r.scale,
                    "delta": r.delta,
                    "log10_delta": r.log10_delta,
                    "n": r.n,
                }
                for r in self.rows
            ],
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")

    def cell(self, kind: str, block: int, scale: float) -> ReportRow:
        for r in self.rows:
            if r.kind == kind and r.block == block and r.scale == scale:
                return r
        raise KeyError((kind, block, scale))


def _fmt(value: float) -> str:
    return format(value, ".17g")


def _crop(arr: np.ndarray, margin: float):
    h, w = arr.shape[-2:]
    my = int(round(h * margin))
    mx = int(round(w * margin))
    return arr[..., my : h - my, mx : w - mx]


def _delta_ratio(feats: np.ndarray, feats_of_scaled: np.ndarray, s: float, margin: float) -> float:
    scaled_feats = scale_transform_stack(feats, s, border=BorderPolicy.ZERO)
    num = _crop(scaled_feats - feats_of_scaled, margin)
    den = _crop(scaled_feats, margin)
    den_sq = float(np.sum(den * den))
    if den_sq == 0.0:
        raise SeslabError(
            "equivariance error undefined: scaled feature map is identically zero"
        )
    return float(np.sum(num * num)) / den_sq


def equivariance_error(stack: Stack, images, s: float, block: int, crop_margin: float = 0.1) -> float:
    """Mean normalized squared feature difference over ``images``:

        (1/N) sum_i ||T_s F(h_i) - F(T_s h_i)||^2 / ||T_s F(h_i)||^2

    where F is the block's activation map, scale-projected for ses stacks,
    and T_s acts channel-wise about the feature-map center. A margin of
    ``crop_margin`` per side is excluded to keep padding artifacts out.
    """
    if not 0.0 < s <= 1.0:
        raise ConfigError(f"scale factor must lie in (0, 1], got {s}")
    if not 1 <= block <= stack.num_blocks:
        raise ConfigError(f"block must lie in 1..{stack.num_blocks}, got {block}")
    ratios = []
    for image in images:
        feats = stack.forward(image)[block - 1]
        g = stack.forward(scale_transform(image, s, border=BorderPolicy.ZERO))[block - 1]
        ratios.append(_delta_ratio(feats, g, s, crop_margin))
    return math.fsum(ratios) / len(ratios)


def _image_cells(stack: Stack, image, scale_factors, blocks, margin) -> dict:
    image = as_grid(image, rank=2, name="corpus image")
    base = stack.forward(image)
    cells = {}
    for s in scale_factors:
        scaled = stack.forward(scale_transform(image, s, border=BorderPolicy.ZERO))
        for b in blocks:
            cells[(b, s)] = _delta_ratio(base[b - 1], scaled[b - 1], s, margin)
    return cells


def run_experiment(config: EquivConfig) -> EquivReport:
    """Evaluate both stack kinds over the corpus; deterministic per config.

    Corpus items may be evaluated on SESLAB_THREADS worker threads; the
    reduction into per-cell means runs in image order either way, so the
    report is byte-identical across thread counts.
    """
    images = config.corpus.load()
    workers = thread_count()
    rows = []
    for kind in REPORT_KINDS:
        stack = build_stack(replace(config.stack, kind=kind))

        def job(image, _stack=stack):
            return _image_cells(
                _stack, image, config.scale_factors, config.blocks, config.crop_margin
            )

        if workers <= 1:
            cells = [job(image) for image in images]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                cells = list(pool.map(job, images))
        for block in config.blocks:
            for s in config.scale_factors:
                values = [c[(block, s)] for c in cells]
                delta = math.fsum(values) / len(values)
                log10 = math.log10(delta) if delta > 0.0 else float("-inf")
                rows.append(ReportRow(kind, block, float(s), delta, log10, len(values)))
    metadata = {"config": config.to_dict(), "kinds": list(REPORT_KINDS)}
    return EquivReport(rows=tuple(rows), metadata=metadata)


def error_map(stack: Stack, image, s: float, block: int) -> np.ndarray:
    """Per-pixel squared feature error summed over channels, peak-normalized.

    Returns an [H, W] grid scaled so its maximum is 1 (all-zero maps stay
    all zero, which is the s = 1 case).
    """
    if not 0.0 < s <= 1.0:
        raise ConfigError(f"scale factor must lie in (0, 1], got {s}")
    if not 1 <= block <= stack.num_blocks:
        raise ConfigError(f"block must lie in 1..{stack.num_blocks}, got {block}")
    image = as_grid(image, rank=2, name="image")
    feats = stack.forward(image)[block - 1]
    g = stack.forward(scale_transform(image, s, border=BorderPolicy.ZERO))[block - 1]
    diff = scale_transform_stack(feats, s, border=BorderPolicy.ZERO) - g
    err = np.sum(diff * diff, axis=0)
    peak = err.max()
    return err / peak if peak > 0 else err

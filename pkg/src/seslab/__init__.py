"""seslab: scale-equivariant steerable convolutions, projective image
geometry, and equivariance-error measurement."""

from .basis import (
    ScaleSet,
    SteerableBasis,
    basis_filter,
    build_basis,
    hermite,
    hermite_gaussian,
    load_basis,
    save_basis,
    scale_set_from_alpha,
)
from .conv import conv2d
from .errors import (
    ConfigError,
    DegenerateGeometryError,
    FormatError,
    SeslabError,
    ShapeError,
)
from .fileio import (
    read_grid,
    read_pgm,
    read_tensor,
    write_grid,
    write_pgm,
    write_tensor,
)
from .geometry import (
    CameraIntrinsics,
    DatasetFocalProfile,
    EgoMotion,
    PatchPlane,
    corollary_deviation,
    focal_correction,
    inverse_log_polar,
    log_polar,
    log_polar_roundtrip_ssim,
    parallel_bound,
    projective_mapping,
    scale_factor,
    scale_mapping,
)
from .grid import BorderPolicy, as_grid
from .harness import (
    CorpusSpec,
    EquivConfig,
    EquivReport,
    equivariance_error,
    error_map,
    run_experiment,
)
from .resample import (
    PixelMapping,
    bilinear_sample,
    resize,
    sample_at,
    scale_transform,
    scale_transform_stack,
    warp,
)
from .sesconv import (
    paper_scale_gains,
    LayerSpec,
    SesFilterBank,
    Stack,
    StackSpec,
    build_stack,
    combine,
    norm2d,
    relu,
    scale_matched_residue,
    scale_projection,
    se_norm,
    se_pool,
    ses_conv_input,
    ses_conv_scalewise,
    single_scale_residue,
)
from .ssim import gaussian_window, ssim
from .synth import render_gaussian_blobs, synth_corpus, synth_image

__version__ = "0.1.0"

__all__ = [
    "BorderPolicy",
    "CameraIntrinsics",
    "ConfigError",
    "CorpusSpec",
    "DatasetFocalProfile",
    "DegenerateGeometryError",
    "EgoMotion",
    "EquivConfig",
    "EquivReport",
    "FormatError",
    "LayerSpec",
    "PatchPlane",
    "PixelMapping",
    "ScaleSet",
    "SeslabError",
    "SesFilterBank",
    "ShapeError",
    "Stack",
    "StackSpec",
    "SteerableBasis",
    "as_grid",
    "basis_filter",
    "bilinear_sample",
    "build_basis",
    "build_stack",
    "combine",
    "conv2d",
    "corollary_deviation",
    "equivariance_error",
    "error_map",
    "focal_correction",
    "gaussian_window",
    "hermite",
    "hermite_gaussian",
    "inverse_log_polar",
    "load_basis",
    "log_polar",
    "log_polar_roundtrip_ssim",
    "norm2d",
    "paper_scale_gains",
    "parallel_bound",
    "projective_mapping",
    "read_grid",
    "read_pgm",
    "read_tensor",
    "relu",
    "render_gaussian_blobs",
    "resize",
    "run_experiment",
    "sample_at",
    "save_basis",
    "scale_factor",
    "scale_mapping",
    "scale_matched_residue",
    "scale_projection",
    "scale_set_from_alpha",
    "scale_transform",
    "scale_transform_stack",
    "se_norm",
    "se_pool",
    "ses_conv_input",
    "ses_conv_scalewise",
    "single_scale_residue",
    "ssim",
    "synth_corpus",
    "synth_image",
    "warp",
    "write_grid",
    "write_pgm",
    "write_tensor",
]

"""Multiscopic disparity estimation by direct self-supervised optimization.

Given three horizontally aligned views with equal baselines (left, center,
right), the center-to-left and center-to-right disparities of every scene
point coincide. This package estimates that shared disparity without
ground truth: a cost-volume matcher provides an initial field, then the
field (together with a per-pixel uncertainty map) is refined by minimizing
a self-supervision objective built from cross photometric reconstruction,
uncertainty-weighted residuals, mutual consistency between the two pair
estimates, and edge-aware smoothness. A procedural scene generator with
exact ground truth and occlusion masks supports evaluation.
"""

from .errors import DegenerateInputError, FormatError, NumericalError
from .grids import (
    DisparityField,
    Image,
    Mask,
    MultiscopicFrame,
    UncertaintyField,
    downsample,
    downsample_disparity,
)
from .fileio import (
    load_image,
    load_mask,
    load_pfm,
    load_pfm_raw,
    load_scene,
    save_image,
    save_mask,
    save_pfm,
    save_scene,
)
from .warp import CrossWarpSet, WarpResult, cross_warp, sample_bilinear, warp_to_center
from .losses import (
    LossConfig,
    LossReport,
    LossWeights,
    mutual_loss,
    photometric_loss,
    smoothness_loss,
    ssim_map,
    total_loss,
    uncertainty_loss,
)
from .matcher import CostVolume, build_cost_volume, soft_argmin, wta_disparity
from .metrics import bad_n, d1, d1_occ, epe, scene_report
from .refine import RefineConfig, RefineResult, refine
from .synth import SceneConfig, generate_scene, generate_suite
from .pipeline import RunConfig, run_frame, run_scene_dir

__version__ = "0.1.0"

__all__ = [
    "DegenerateInputError",
    "FormatError",
    "NumericalError",
    "Image",
    "DisparityField",
    "UncertaintyField",
    "Mask",
    "MultiscopicFrame",
    "downsample",
    "downsample_disparity",
    "load_image",
    "save_image",
    "load_pfm",
    "load_pfm_raw",
    "save_pfm",
    "load_mask",
    "save_mask",
    "load_scene",
    "save_scene",
    "sample_bilinear",
    "warp_to_center",
    "cross_warp",
    "WarpResult",
    "CrossWarpSet",
    "LossConfig",
    "LossWeights",
    "LossReport",
    "ssim_map",
    "photometric_loss",
    "uncertainty_loss",
    "mutual_loss",
    "smoothness_loss",
    "total_loss",
    "CostVolume",
    "build_cost_volume",
    "wta_disparity",
    "soft_argmin",
    "epe",
    "bad_n",
    "d1",
    "d1_occ",
    "scene_report",
    "RefineConfig",
    "RefineResult",
    "refine",
    "SceneConfig",
    "generate_scene",
    "generate_suite",
    "RunConfig",
    "run_frame",
    "run_scene_dir",
]

"""Real-time single-object tracking with confidence-adaptive feature fusion."""

from . import bench
from .colormodel import ColorModel, color_response, fit_color_weights, update_color_weights
from .corrfilter import (
    FilterModel,
    ResponseMap,
    detect,
    gaussian_label,
    scale_search,
    train_filter,
    update_filter,
)
from .features import (
    BoundingBox,
    FeatureMap,
    color_bin_index,
    extract_patch,
    gray_features,
    hann_window,
    hog_features,
)
from .fusion import (
    ConfidenceHistory,
    FusionParams,
    adaptive_alpha,
    apce,
    fuse_responses,
    relative_confidence,
    update_gate,
)
from .projection import CubicKernel, apply_projection, cg_solve, learn_projection, resample_channel
from .tracker import Diagnostics, TrackerConfig, TrackerState, init_tracker, locate_peak, step

__version__ = "0.1.0"

__all__ = [
    "bench",
    "BoundingBox",
    "ColorModel",
    "ConfidenceHistory",
    "CubicKernel",
    "Diagnostics",
    "FeatureMap",
    "FilterModel",
    "FusionParams",
    "ResponseMap",
    "TrackerConfig",
    "TrackerState",
    "adaptive_alpha",
    "apce",
    "apply_projection",
    "cg_solve",
    "color_bin_index",
    "color_response",
    "detect",
    "extract_patch",
    "fit_color_weights",
    "fuse_responses",
    "gaussian_label",
    "gray_features",
    "hann_window",
    "hog_features",
    "init_tracker",
    "learn_projection",
    "locate_peak",
    "relative_confidence",
    "resample_channel",
    "scale_search",
    "step",
    "train_filter",
    "update_color_weights",
    "update_filter",
    "update_gate",
]

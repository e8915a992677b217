"""Single-object tracker: initialization and the per-frame update loop.

Each frame runs the same six stages: multi-scale filter detection on
projected HOG+gray features, a color likelihood response on the same grid,
grid alignment, confidence-adaptive blending, sub-cell peak localization,
and a confidence-gated update of both appearance models.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import colormodel, corrfilter, fusion
from .corrfilter import FilterModel, ResponseMap
from .features import (
    BoundingBox,
    extract_patch,
    gray_features,
    hann_window,
    hog_features,
    rgb_to_gray,
)
from .projection import apply_projection, learn_projection

Diagnostics = fusion.FusionRecord


@dataclass
class TrackerConfig:
    """All tunables of the tracker; defaults match the reference setup."""

    cf_reg: float = 1e-3            # ridge weight of the filter solve
    cf_lr: float = 0.01             # filter statistics learning rate
    color_lr: float = 0.04          # color statistics learning rate
    color_bins: int = 32            # histogram bins per channel
    color_reg: float = 1e-3         # ridge weight of the color regression
    fusion_alpha: float = 0.25      # base blend toward the color response
    fusion_rho: float = 1.0         # confidence influence on the blend
    invert_confidence: bool = False # flip the confidence/blend direction
    adaptive_fusion: bool = True    # False pins the blend at fusion_alpha
    gate_margin: float = 1.0        # update when apce >= margin * mean
    cell_size: int = 4
    padding: float = 2.0            # search window = target * (1 + padding)
    fixed_area: int = 150 * 150     # sampled search patch area cap, px^2
    output_sigma_factor: float = 1.0 / 16.0
    c_dim: int = 12                 # feature channels after reduction
    proj_reg: float = 1e-2          # ridge weight on the reduction matrix
    gn_iters: int = 5
    cg_iters: int = 20
    cg_tol: float = 1e-6
    projection_init: str = "pca"    # "pca" or "identity"
    n_scales: int = 5
    scale_step: float = 1.02
    scale_penalty: float = 1.015
    exact_solve: bool = True        # full per-frequency solve vs diagonal

    def __post_init__(self):
        for name in ("cf_lr", "color_lr"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")
        if self.cf_reg <= 0:
            raise ValueError("cf_reg must be positive")
        if self.n_scales < 1 or self.scale_step <= 0:
            raise ValueError("invalid scale pyramid")
        if self.cell_size < 1:
            raise ValueError("cell_size must be >= 1")

    def scale_factors(self) -> np.ndarray:
        ks = np.arange(self.n_scales) - self.n_scales // 2
        return self.scale_step**ks

    def scale_penalties(self) -> np.ndarray:
        ks = np.arange(self.n_scales) - self.n_scales // 2
        return self.scale_penalty ** (-np.abs(ks))


@dataclass
class TrackerState:
    """Everything the tracker carries between frames."""

    config: TrackerConfig
    position: tuple[float, float]       # target center (x, y)
    base_size: tuple[float, float]      # target extents at scale 1
    scale: float
    base_window: tuple[float, float]    # search window extents at scale 1
    model_size: tuple[int, int]         # sampled patch (w, h), fixed per run
    target_px: tuple[float, float]      # target extents on the model grid
    label: np.ndarray
    window: np.ndarray
    projection: np.ndarray
    filter: FilterModel
    color: colormodel.ColorModel
    history: fusion.ConfidenceHistory
    frame_hw: tuple[int, int]
    frames_tracked: int = 0

    @property
    def target_size(self) -> tuple[float, float]:
        return (self.base_size[0] * self.scale, self.base_size[1] * self.scale)

    def box(self) -> BoundingBox:
        w, h = self.target_size
        return BoundingBox(self.position[0], self.position[1], w, h)


def _feature_stack(patch: np.ndarray, cell_size: int) -> np.ndarray:
    gray = rgb_to_gray(patch)
    hog = hog_features(gray, cell_size)
    return np.concatenate([hog.data, gray_features(gray, cell_size).data], axis=-1)


def _sample(state: TrackerState, frame: np.ndarray, pyramid_scale: float):
    """Windowed raw feature stack and the pixel patch at one pyramid scale."""
    win_w = state.base_window[0] * state.scale * pyramid_scale
    win_h = state.base_window[1] * state.scale * pyramid_scale
    box = BoundingBox(state.position[0], state.position[1], win_w, win_h)
    patch = extract_patch(frame, box, state.model_size[0], state.model_size[1])
    feats = _feature_stack(patch, state.config.cell_size) * state.window[..., None]
    return feats, patch


def _color_regions(state: TrackerState) -> tuple[BoundingBox, tuple[BoundingBox, BoundingBox]]:
    mw, mh = state.model_size
    cx, cy = (mw - 1) / 2.0, (mh - 1) / 2.0
    tw, th = state.target_px
    fg = BoundingBox(cx, cy, tw, th)
    outer = BoundingBox(cx, cy, float(mw), float(mh))
    return fg, (fg, outer)


def _fit_color(state: TrackerState, patch: np.ndarray) -> colormodel.ColorModel:
    fg, bg = _color_regions(state)
    return colormodel.fit_color_weights(
        patch, fg, bg, state.config.color_bins, state.config.color_reg
    )


def init_tracker(frame: np.ndarray, box: BoundingBox, config: TrackerConfig | None = None) -> TrackerState:
    """Build the tracker state from the first frame and its target box.

    Learns the channel-reduction matrix on this frame only, then trains the
    correlation filter on the projected features and fits the color model
    from the target/surroundings split of the search patch.
    """
    config = config or TrackerConfig()
    frame = np.asarray(frame)
    fh, fw = frame.shape[:2]
    if box.w * box.h < 16:
        raise ValueError("target box area must be at least 16 px^2")
    x, y, w, h = box.to_xywh()
    if x < 0 or y < 0 or x + w > fw or y + h > fh:
        raise ValueError("target box must lie inside the frame")

    cell = config.cell_size
    win_w = box.w * (1.0 + config.padding)
    win_h = box.h * (1.0 + config.padding)
    shrink = min(1.0, math.sqrt(config.fixed_area / (win_w * win_h)))
    model_w = max(2, int(round(win_w * shrink / cell))) * cell
    model_h = max(2, int(round(win_h * shrink / cell))) * cell
    target_px = (box.w * model_w / win_w, box.h * model_h / win_h)

    rows, cols = model_h // cell, model_w // cell
    sigma = math.sqrt((target_px[0] / cell) * (target_px[1] / cell)) * config.output_sigma_factor
    label = corrfilter.gaussian_label(rows, cols, sigma)
    window = hann_window(rows, cols)

    state = TrackerState(
        config=config,
        position=(box.cx, box.cy),
        base_size=(box.w, box.h),
        scale=1.0,
        base_window=(win_w, win_h),
        model_size=(model_w, model_h),
        target_px=target_px,
        label=label,
        window=window,
        projection=np.empty(0),
        filter=None,  # type: ignore[arg-type]
        color=None,  # type: ignore[arg-type]
        history=fusion.ConfidenceHistory(),
        frame_hw=(fh, fw),
    )

    feats, patch = _sample(state, frame, 1.0)
    init = "identity" if config.projection_init == "identity" else None
    fit = learn_projection(
        [feats],
        [label],
        config.c_dim,
        filter_reg=config.cf_reg,
        matrix_reg=config.proj_reg,
        gn_iters=config.gn_iters,
        cg_iters=config.cg_iters,
        cg_tol=config.cg_tol,
        init=init,
    )
    state.projection = fit.matrix
    projected = apply_projection(feats, fit.matrix)
    state.filter = corrfilter.train_filter(projected, label, config.cf_reg, config.exact_solve)
    state.color = _fit_color(state, patch)
    return state


def locate_peak(response: ResponseMap) -> tuple[float, float]:
    """Sub-cell peak position of a response map, in image coordinates.

    A unique interior maximum is refined by a separable quadratic fit over
    its 3x3 neighbourhood; tied maxima resolve to the tied cell nearest the
    grid center (their midpoint when symmetric) without refinement.
    """
    v = response.values
    if v.size == 0:
        raise ValueError("empty response")
    rows, cols = v.shape
    ties = np.argwhere(v == v.max())
    if len(ties) == 1:
        r, c = map(int, ties[0])
        dr = dc = 0.0
        if 0 < r < rows - 1:
            dr = _quad_offset(v[r - 1, c], v[r, c], v[r + 1, c])
        if 0 < c < cols - 1:
            dc = _quad_offset(v[r, c - 1], v[r, c], v[r, c + 1])
        row, col = r + dr, c + dc
    else:
        center = np.array([(rows - 1) / 2.0, (cols - 1) / 2.0])
        d2 = ((ties - center) ** 2).sum(axis=1)
        nearest = ties[d2 == d2.min()]
        row, col = nearest.mean(axis=0)
    return (
        response.origin_x + col * response.cell_w,
        response.origin_y + row * response.cell_h,
    )


def _quad_offset(a: float, b: float, c: float) -> float:
    den = a + c - 2.0 * b
    if den >= -1e-12:
        return 0.0
    return float(np.clip(0.5 * (a - c) / den, -0.5, 0.5))


def _response_geometry(state: TrackerState, pyramid_scale: float):
    mw, mh = state.model_size
    cell = state.config.cell_size
    ratio_x = state.base_window[0] * state.scale * pyramid_scale / mw
    ratio_y = state.base_window[1] * state.scale * pyramid_scale / mh
    return cell * ratio_x, cell * ratio_y


def step(state: TrackerState, frame: np.ndarray):
    """Track the target into ``frame``.

    Returns ``(state, box, diagnostics)`` where ``state`` is a new
    TrackerState (models are never mutated in place, and stay shared with
    the input state when the confidence gate rejects the update).
    """
    cfg = state.config
    frame = np.asarray(frame)
    fh, fw = frame.shape[:2]
    rows, cols = state.label.shape

    scales = cfg.scale_factors()
    penalties = cfg.scale_penalties()
    patches: dict[float, np.ndarray] = {}

    def sample_fn(s: float) -> np.ndarray:
        feats, patch = _sample(state, frame, s)
        patches[s] = patch
        return apply_projection(feats, state.projection)

    idx, raw_resp, peak = corrfilter.scale_search(state.filter, sample_fn, scales, penalties)
    best_scale = float(scales[idx])
    patch = patches[best_scale]

    cell_w, cell_h = _response_geometry(state, best_scale)
    origin_x = state.position[0] - (cols // 2) * cell_w
    origin_y = state.position[1] - (rows // 2) * cell_h
    cf_map = ResponseMap(np.fft.fftshift(raw_resp), cell_w, cell_h, origin_x, origin_y)

    hist_vals = colormodel.color_response(
        patch, state.color, state.target_px[0], state.target_px[1], rows, cols
    )
    hist_map = ResponseMap(hist_vals, cell_w, cell_h, origin_x, origin_y)

    apce_t = fusion.apce(cf_map)
    r_t = fusion.relative_confidence(apce_t, state.history)
    params = fusion.FusionParams(cfg.fusion_alpha, cfg.fusion_rho, cfg.invert_confidence)
    alpha_t = fusion.adaptive_alpha(r_t, params) if cfg.adaptive_fusion else cfg.fusion_alpha
    fused = fusion.fuse_responses(cf_map, hist_map, alpha_t)

    px, py = locate_peak(fused)
    clamped = False
    win_w = state.base_window[0] * state.scale * best_scale
    win_h = state.base_window[1] * state.scale * best_scale
    if win_w > fw or win_h > fh:
        clamped = True
    nx = min(max(px, 0.0), fw - 1.0)
    ny = min(max(py, 0.0), fh - 1.0)
    if (nx, ny) != (px, py):
        clamped = True

    new_scale = state.scale * best_scale
    gate = fusion.update_gate(apce_t, state.history, cfg.gate_margin)

    new_state = dataclasses.replace(
        state,
        position=(nx, ny),
        scale=new_scale,
        frame_hw=(fh, fw),
        frames_tracked=state.frames_tracked + 1,
    )

    if gate:
        feats, train_patch = _sample(new_state, frame, 1.0)
        projected = apply_projection(feats, state.projection)
        feat_hat = np.fft.rfft2(projected, axes=(0, 1))
        label_hat = np.fft.rfft2(state.label)
        num, den = corrfilter.sample_stats(feat_hat, label_hat, cfg.exact_solve)
        new_state.filter = corrfilter.update_filter(state.filter, num, den, cfg.cf_lr)
        new_color = _fit_color(new_state, train_patch)
        new_state.color = colormodel.update_color_weights(state.color, new_color, cfg.color_lr)

    state.history.append(apce_t)

    diag = Diagnostics(
        apce=apce_t,
        confidence=r_t,
        alpha=float(alpha_t),
        gate=gate,
        scale_step=best_scale,
        scale=new_scale,
        peak=peak,
        clamped=clamped,
    )
    return new_state, new_state.box(), diag

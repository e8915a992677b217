"""Per-pixel discriminative color model and its box-averaged response.

Foreground probability per histogram bin comes from a closed-form ridge
regression on foreground/background pixel proportions; the response map
averages the per-pixel likelihood over a target-sized box at every
candidate center with a single integral-image pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import BoundingBox, color_bin_map


@dataclass
class ColorModel:
    """Per-bin weights plus the proportion statistics they derive from."""

    beta: np.ndarray
    fg_prop: np.ndarray
    bg_prop: np.ndarray
    bins_per_channel: int
    reg: float
    grayscale: bool = False

    @property
    def bins(self) -> int:
        return self.beta.size


def _weights_from_props(fg_prop: np.ndarray, bg_prop: np.ndarray, reg: float) -> np.ndarray:
    den = fg_prop + bg_prop + reg
    return np.divide(fg_prop, den, out=np.zeros_like(fg_prop), where=den > 0)


def _box_mask_bounds(box: BoundingBox, h: int, w: int):
    x0 = int(round(box.cx - box.w / 2.0))
    y0 = int(round(box.cy - box.h / 2.0))
    x1 = x0 + int(round(box.w))
    y1 = y0 + int(round(box.h))
    return max(y0, 0), min(y1, h), max(x0, 0), min(x1, w)


def fit_color_weights(
    patch: np.ndarray,
    fg: BoundingBox,
    bg: tuple[BoundingBox, BoundingBox],
    bins_per_channel: int = 32,
    reg: float = 1e-3,
) -> ColorModel:
    """Fit per-bin foreground weights from one patch.

    ``fg`` marks the foreground pixels; ``bg`` is an (inner, outer) box pair
    whose ring (inside outer, outside inner) provides the background pixels.
    Each bin's weight is fg_prop / (fg_prop + bg_prop + reg), the minimizer
    of the proportion-weighted squared error of labelling foreground pixels
    1 and background pixels 0, with a ridge of strength ``reg``.  Bins seen
    in neither region get weight 0.  Grayscale patches fall back to a 1-D
    intensity histogram with ``bins_per_channel`` bins.
    """
    a = np.asarray(patch)
    grayscale = a.ndim == 2
    h, w = a.shape[:2]
    idx = color_bin_map(a, bins_per_channel)
    nbins = bins_per_channel if grayscale else bins_per_channel**3

    fy0, fy1, fx0, fx1 = _box_mask_bounds(fg, h, w)
    if fy1 <= fy0 or fx1 <= fx0:
        raise ValueError("empty foreground region")
    fg_mask = np.zeros((h, w), dtype=bool)
    fg_mask[fy0:fy1, fx0:fx1] = True

    inner, outer = bg
    oy0, oy1, ox0, ox1 = _box_mask_bounds(outer, h, w)
    iy0, iy1, ix0, ix1 = _box_mask_bounds(inner, h, w)
    bg_mask = np.zeros((h, w), dtype=bool)
    bg_mask[oy0:oy1, ox0:ox1] = True
    bg_mask[iy0:iy1, ix0:ix1] = False
    bg_mask &= ~fg_mask
    if not bg_mask.any():
        raise ValueError("empty background region")

    fg_counts = np.bincount(idx[fg_mask], minlength=nbins).astype(np.float64)
    bg_counts = np.bincount(idx[bg_mask], minlength=nbins).astype(np.float64)
    fg_prop = fg_counts / fg_counts.sum()
    bg_prop = bg_counts / bg_counts.sum()
    beta = _weights_from_props(fg_prop, bg_prop, reg)
    return ColorModel(beta, fg_prop, bg_prop, bins_per_channel, reg, grayscale)


def update_color_weights(model: ColorModel, new: ColorModel, lr: float) -> ColorModel:
    """Blend proportion statistics with rate ``lr`` and re-derive the weights."""
    if not 0.0 <= lr <= 1.0:
        raise ValueError("learning rate must be in [0, 1]")
    if model.bins != new.bins or model.grayscale != new.grayscale:
        raise ValueError("bin layout mismatch")
    fg = (1.0 - lr) * model.fg_prop + lr * new.fg_prop
    bg = (1.0 - lr) * model.bg_prop + lr * new.bg_prop
    return ColorModel(
        _weights_from_props(fg, bg, model.reg),
        fg,
        bg,
        model.bins_per_channel,
        model.reg,
        model.grayscale,
    )


def box_mean_map(likelihood: np.ndarray, box_w: int, box_h: int) -> np.ndarray:
    """Mean of ``likelihood`` over a box_w x box_h window at every valid
    top-left corner, via one integral-image pass."""
    h, w = likelihood.shape
    if box_w > w or box_h > h:
        raise ValueError("box larger than the patch")
    ii = np.zeros((h + 1, w + 1))
    np.cumsum(np.cumsum(likelihood, axis=0), axis=1, out=ii[1:, 1:])
    sums = ii[box_h:, box_w:] - ii[:-box_h, box_w:] - ii[box_h:, :-box_w] + ii[:-box_h, :-box_w]
    return sums / float(box_w * box_h)


def color_response(
    patch: np.ndarray,
    model: ColorModel,
    target_w: float,
    target_h: float,
    out_rows: int,
    out_cols: int,
) -> np.ndarray:
    """Box-averaged foreground likelihood sampled on a detection grid.

    Output cell (r, k) is the mean likelihood over a target-sized box whose
    center sits ``(k - out_cols//2)`` grid steps right and
    ``(r - out_rows//2)`` steps below the patch center, with one grid step
    equal to patch extent / output extent.  Centers whose box would leave
    the patch clamp to the nearest valid center.
    """
    a = np.asarray(patch)
    grayscale = a.ndim == 2
    if grayscale != model.grayscale:
        raise ValueError("patch/model channel layout mismatch")
    h, w = a.shape[:2]
    bw = min(max(int(round(target_w)), 1), w)
    bh = min(max(int(round(target_h)), 1), h)

    likelihood = model.beta[color_bin_map(a, model.bins_per_channel)]
    means = box_mean_map(likelihood, bw, bh)

    # patch coordinates of the requested grid, centered like a shifted
    # cyclic detection map (zero displacement at index out//2)
    px = (w - 1) / 2.0 + (np.arange(out_cols) - out_cols // 2) * (w / out_cols)
    py = (h - 1) / 2.0 + (np.arange(out_rows) - out_rows // 2) * (h / out_rows)
    # convert box centers to top-left indices of the valid-corner map
    sx = np.clip(px - (bw - 1) / 2.0, 0.0, means.shape[1] - 1.0)
    sy = np.clip(py - (bh - 1) / 2.0, 0.0, means.shape[0] - 1.0)

    x0 = np.floor(sx).astype(np.intp)
    y0 = np.floor(sy).astype(np.intp)
    x1 = np.minimum(x0 + 1, means.shape[1] - 1)
    y1 = np.minimum(y0 + 1, means.shape[0] - 1)
    fx = (sx - x0)[None, :]
    fy = (sy - y0)[:, None]
    top = means[y0[:, None], x0[None, :]] * (1 - fx) + means[y0[:, None], x1[None, :]] * fx
    bot = means[y1[:, None], x0[None, :]] * (1 - fx) + means[y1[:, None], x1[None, :]] * fx
    return top * (1 - fy) + bot * fy

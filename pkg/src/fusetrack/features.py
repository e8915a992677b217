"""Patch extraction and hand-crafted appearance features.

Frames are plain numpy arrays: ``(H, W, 3)`` RGB or ``(H, W)`` grayscale,
any real dtype on the 0..255 scale.  Feature grids are float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRAY_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass
class BoundingBox:
    """Axis-aligned box with a sub-pixel center and positive pixel extents."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box extents must be positive, got {self.w}x{self.h}")

    @classmethod
    def from_xywh(cls, x, y, w, h, one_based: bool = False) -> "BoundingBox":
        """Build from a corner-based (x, y, w, h) rectangle.

        ``one_based`` selects the dataset convention where the top-left image
        pixel is (1, 1).  Conversions are exact inverses of :meth:`to_xywh`.
        """
        off = 1.0 if one_based else 0.0
        return cls(x - off + (w - 1.0) / 2.0, y - off + (h - 1.0) / 2.0, float(w), float(h))

    def to_xywh(self, one_based: bool = False) -> tuple[float, float, float, float]:
        off = 1.0 if one_based else 0.0
        return (
            self.cx - (self.w - 1.0) / 2.0 + off,
            self.cy - (self.h - 1.0) / 2.0 + off,
            self.w,
            self.h,
        )

    def scaled(self, factor: float) -> "BoundingBox":
        """Same center, extents multiplied by ``factor``."""
        return BoundingBox(self.cx, self.cy, self.w * factor, self.h * factor)


@dataclass
class FeatureMap:
    """Dense rows x cols x channels grid of real-valued cell features."""

    data: np.ndarray
    cell_size: float = 1.0

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


def feature_data(features) -> np.ndarray:
    """Unwrap a FeatureMap or pass an array through, as float64."""
    return np.asarray(getattr(features, "data", features), dtype=np.float64)


def rgb_to_gray(frame: np.ndarray) -> np.ndarray:
    """Luma grayscale conversion; 2-D inputs pass through unchanged."""
    a = np.asarray(frame, dtype=np.float64)
    if a.ndim == 2:
        return a
    if a.ndim == 3 and a.shape[2] == 3:
        r, g, b = GRAY_WEIGHTS
        return a[..., 0] * r + a[..., 1] * g + a[..., 2] * b
    raise ValueError(f"expected (H, W) or (H, W, 3) frame, got shape {a.shape}")


def _bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample img at the grid ys x xs with bilinear interpolation.

    Coordinates outside the pixel-center lattice replicate the nearest
    border pixel.
    """
    h, w = img.shape[:2]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    if img.ndim == 3:
        fx = fx[None, :, None]
        fy = fy[:, None, None]
    else:
        fx = fx[None, :]
        fy = fy[:, None]
    p = np.asarray(img, dtype=np.float64)
    top = p[y0[:, None], x0[None, :]] * (1.0 - fx) + p[y0[:, None], x1[None, :]] * fx
    bot = p[y1[:, None], x0[None, :]] * (1.0 - fx) + p[y1[:, None], x1[None, :]] * fx
    return top * (1.0 - fy) + bot * fy


def extract_patch(frame: np.ndarray, box: BoundingBox, out_w: int, out_h: int) -> np.ndarray:
    """Resample the region covered by ``box`` to an out_h x out_w pixel grid.

    Output sample ``j`` along x lands at ``cx + (j - (out_w - 1)/2) * w/out_w``
    on the source pixel-center lattice, so a box whose extents equal the
    output dims reproduces the covered pixels exactly.  Samples falling
    outside the frame replicate the nearest border pixel.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError("output dims must be >= 1")
    w = max(float(box.w), 1.0)
    h = max(float(box.h), 1.0)
    xs = box.cx + (np.arange(out_w) - (out_w - 1) / 2.0) * (w / out_w)
    ys = box.cy + (np.arange(out_h) - (out_h - 1) / 2.0) * (h / out_h)
    return _bilinear_sample(np.asarray(frame), xs, ys)


def hann_window(rows: int, cols: int) -> np.ndarray:
    """Separable raised-cosine weights: zero on the border, 1 at the center."""
    if rows < 1 or cols < 1:
        raise ValueError("window dims must be >= 1")
    return np.outer(np.hanning(rows), np.hanning(cols))


def hog_features(patch: np.ndarray, cell_size: int = 4, orientations: int = 9) -> FeatureMap:
    """Per-cell gradient-orientation histograms with block normalization.

    The descriptor has ``3 * orientations + 4`` channels per cell:
    ``2 * orientations`` contrast-sensitive direction bins, ``orientations``
    contrast-insensitive bins, and 4 gradient-energy channels.  Each
    histogram entry is normalized against the four 2x2-cell blocks touching
    the cell, clipped at 0.2 and averaged, which keeps all outputs in [0, 1]
    and makes the features invariant to constant intensity shifts.
    """
    p = np.asarray(patch, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("hog_features expects a grayscale patch")
    h, w = p.shape
    if h % cell_size or w % cell_size:
        raise ValueError(f"patch dims {h}x{w} not divisible by cell size {cell_size}")
    cy, cx = h // cell_size, w // cell_size
    nb = 2 * orientations

    padded = np.pad(p, 1, mode="edge")
    dx = padded[1:-1, 2:] - padded[1:-1, :-2]
    dy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    mag = np.hypot(dx, dy)
    # snap each pixel to the nearest of 2*orientations signed directions
    bins = np.round(np.arctan2(dy, dx) * (nb / (2.0 * np.pi))).astype(np.intp) % nb

    # bilinear spatial interpolation of each pixel into its 4 nearest cells;
    # weight falling outside the grid folds back onto the border cell
    uy = (np.arange(h) + 0.5) / cell_size - 0.5
    ux = (np.arange(w) + 0.5) / cell_size - 0.5
    y0 = np.floor(uy).astype(np.intp)
    x0 = np.floor(ux).astype(np.intp)
    wy1 = uy - y0
    wx1 = ux - x0
    ys = (np.clip(y0, 0, cy - 1), np.clip(y0 + 1, 0, cy - 1))
    xs = (np.clip(x0, 0, cx - 1), np.clip(x0 + 1, 0, cx - 1))
    wys = (1.0 - wy1, wy1)
    wxs = (1.0 - wx1, wx1)

    hist = np.zeros(cy * cx * nb)
    for iy, wy in zip(ys, wys):
        row_idx = (iy[:, None] * cx + xs[0][None, :]) * nb + bins
        alt_idx = (iy[:, None] * cx + xs[1][None, :]) * nb + bins
        for idx, wx in ((row_idx, wxs[0]), (alt_idx, wxs[1])):
            wgt = mag * wy[:, None] * wx[None, :]
            hist += np.bincount(idx.ravel(), weights=wgt.ravel(), minlength=hist.size)
    hist = hist.reshape(cy, cx, nb)

    unsigned = hist[..., :orientations] + hist[..., orientations:nb]
    energy = np.sum(unsigned**2, axis=-1)
    epad = np.pad(energy, 1, mode="edge")
    blk = epad[:-1, :-1] + epad[:-1, 1:] + epad[1:, :-1] + epad[1:, 1:]
    # per-cell normalizers from the 4 neighbouring 2x2 blocks: NW, NE, SW, SE
    norms = np.stack(
        [blk[:-1, :-1], blk[:-1, 1:], blk[1:, :-1], blk[1:, 1:]], axis=-1
    )
    inv = 1.0 / np.sqrt(norms + 1e-10)

    clipped = np.minimum(hist[..., :, None] * inv[..., None, :], 0.2)
    uclipped = np.minimum(unsigned[..., :, None] * inv[..., None, :], 0.2)
    feat = np.empty((cy, cx, 3 * orientations + 4))
    feat[..., :nb] = 0.5 * clipped.sum(axis=-1)
    feat[..., nb : nb + orientations] = 0.5 * uclipped.sum(axis=-1)
    feat[..., nb + orientations :] = clipped.sum(axis=2) / np.sqrt(float(nb))
    return FeatureMap(feat, float(cell_size))


def gray_features(patch: np.ndarray, cell_size: int = 4) -> FeatureMap:
    """Single-channel cell intensities, zero-mean over the patch.

    Each cell holds the mean gray value of its pixels, shifted by the patch
    mean and divided by 510 so the output always lies in [-0.5, 0.5].
    """
    g = rgb_to_gray(patch)
    h, w = g.shape
    if h % cell_size or w % cell_size:
        raise ValueError(f"patch dims {h}x{w} not divisible by cell size {cell_size}")
    cells = g.reshape(h // cell_size, cell_size, w // cell_size, cell_size).mean(axis=(1, 3))
    cells = (cells - cells.mean()) / (2.0 * 255.0)
    return FeatureMap(cells[..., None], float(cell_size))


def color_bin_index(r: int, g: int, b: int, bins_per_channel: int = 32) -> int:
    """Joint RGB histogram bin: floor(c * B / 256) per channel, radix-B packed."""
    bpc = bins_per_channel
    if bpc not in (8, 16, 32):
        raise ValueError(f"bins_per_channel must be 8, 16 or 32, got {bpc}")
    return (int(r) * bpc // 256) * bpc * bpc + (int(g) * bpc // 256) * bpc + int(b) * bpc // 256


def color_bin_map(frame: np.ndarray, bins_per_channel: int = 32) -> np.ndarray:
    """Per-pixel histogram bin indices; grayscale frames use a 1-D histogram."""
    bpc = bins_per_channel
    if bpc not in (8, 16, 32):
        raise ValueError(f"bins_per_channel must be 8, 16 or 32, got {bpc}")
    a = np.clip(np.asarray(frame), 0, 255).astype(np.int64)
    if a.ndim == 2:
        return a * bpc // 256
    if a.ndim == 3 and a.shape[2] == 3:
        r, g, b = a[..., 0], a[..., 1], a[..., 2]
        return (r * bpc // 256) * bpc * bpc + (g * bpc // 256) * bpc + b * bpc // 256
    raise ValueError(f"expected (H, W) or (H, W, 3) frame, got shape {a.shape}")

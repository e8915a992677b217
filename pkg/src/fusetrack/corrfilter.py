"""Multi-channel frequency-domain ridge-regression correlation filter.

Training keeps per-frequency quadratic statistics (a numerator vector and a
denominator matrix per frequency) so the filter can be re-solved exactly
after every running-average update.  Detection is a cyclic multi-channel
convolution evaluated with FFTs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .features import feature_data


@dataclass
class ResponseMap:
    """Real-valued score grid with an affine map from cells to image coords."""

    values: np.ndarray
    cell_w: float = 1.0
    cell_h: float = 1.0
    origin_x: float = 0.0
    origin_y: float = 0.0

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def same_grid(self, other: "ResponseMap") -> bool:
        return (
            self.values.shape == other.values.shape
            and math.isclose(self.cell_w, other.cell_w, rel_tol=1e-9, abs_tol=1e-9)
            and math.isclose(self.cell_h, other.cell_h, rel_tol=1e-9, abs_tol=1e-9)
            and math.isclose(self.origin_x, other.origin_x, rel_tol=1e-9, abs_tol=1e-6)
            and math.isclose(self.origin_y, other.origin_y, rel_tol=1e-9, abs_tol=1e-6)
        )


def _cyclic_shifts(n: int) -> np.ndarray:
    """Signed cyclic distance of every index to the zero-shift bin."""
    d = np.arange(n)
    return np.where(d <= n // 2, d, d - n).astype(np.float64)


def gaussian_label(rows: int, cols: int, sigma: float) -> np.ndarray:
    """Ideal response: cyclic Gaussian with unit peak at the zero-shift bin."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    dy = _cyclic_shifts(rows)
    dx = _cyclic_shifts(cols)
    return np.exp(-(dy[:, None] ** 2 + dx[None, :] ** 2) / (2.0 * sigma**2))


def sample_stats(feat_hat: np.ndarray, label_hat: np.ndarray, exact: bool = True):
    """Per-frequency training statistics of one sample.

    Returns the numerator conj(x)*y per channel and, in exact mode, the
    Hermitian channel-by-channel denominator conj(x) x^T per frequency;
    in diagonal mode the denominator is the shared spectral energy.
    """
    num = np.conj(feat_hat) * label_hat[..., None]
    if exact:
        den = np.conj(feat_hat)[..., :, None] * feat_hat[..., None, :]
    else:
        den = (feat_hat.real**2 + feat_hat.imag**2).sum(axis=-1)
    return num, den


def solve_filter(num: np.ndarray, den: np.ndarray, lam: float, exact: bool = True) -> np.ndarray:
    """Solve the regularized per-frequency normal equations for the filter."""
    if exact:
        c = num.shape[-1]
        return np.linalg.solve(den + lam * np.eye(c), num[..., None])[..., 0]
    return num / (den[..., None] + lam)


@dataclass
class FilterModel:
    """Frequency-domain filter state: statistics plus the solved filter.

    ``num`` has shape (rows, rcols, C); ``den`` is (rows, rcols, C, C) in
    exact mode or (rows, rcols) real in diagonal mode.  ``cols`` keeps the
    spatial width so the inverse transform is unambiguous.
    """

    num: np.ndarray
    den: np.ndarray
    lam: float
    cols: int
    exact: bool = True
    filt_hat: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("regularizer must be >= 0")
        self.filt_hat = solve_filter(self.num, self.den, self.lam, self.exact)

    @property
    def rows(self) -> int:
        return self.num.shape[0]

    @property
    def channels(self) -> int:
        return self.num.shape[-1]


def train_filter(features, label: np.ndarray, lam: float, exact: bool = True) -> FilterModel:
    """Fit the filter to one windowed feature sample and its desired response."""
    data = feature_data(features)
    label = np.asarray(label, dtype=np.float64)
    if data.shape[:2] != label.shape:
        raise ValueError(f"feature grid {data.shape[:2]} != label grid {label.shape}")
    feat_hat = np.fft.rfft2(data, axes=(0, 1))
    label_hat = np.fft.rfft2(label)
    num, den = sample_stats(feat_hat, label_hat, exact)
    return FilterModel(num, den, lam, cols=data.shape[1], exact=exact)


def detect(model: FilterModel, features) -> np.ndarray:
    """Cyclic response of the filter over all shifts of the feature grid.

    Index (0, 0) corresponds to zero displacement; row/column k to a shift
    of k cells (wrapping past half the grid to negative shifts).
    """
    data = feature_data(features)
    expected = (model.rows, model.cols, model.channels)
    if data.shape != expected:
        raise ValueError(f"feature shape {data.shape} does not match model {expected}")
    z_hat = np.fft.rfft2(data, axes=(0, 1))
    spec = (model.filt_hat * z_hat).sum(axis=-1)
    return np.fft.irfft2(spec, s=(model.rows, model.cols))


def update_filter(model: FilterModel, num: np.ndarray, den: np.ndarray, lr: float) -> FilterModel:
    """Blend new sample statistics into the model with rate ``lr``."""
    if not 0.0 <= lr <= 1.0:
        raise ValueError("learning rate must be in [0, 1]")
    if num.shape != model.num.shape or den.shape != model.den.shape:
        raise ValueError("statistics shape mismatch")
    return FilterModel(
        (1.0 - lr) * model.num + lr * num,
        (1.0 - lr) * model.den + lr * den,
        model.lam,
        model.cols,
        model.exact,
    )


def scale_search(
    model: FilterModel,
    sample_fn: Callable[[float], np.ndarray],
    scales: Sequence[float],
    penalties: Sequence[float] | None = None,
):
    """Detect over a scale pyramid and keep the best penalized peak.

    ``sample_fn`` maps a scale factor to the windowed, projected feature
    grid of the search patch resampled at that scale.  Candidates are
    visited nearest-unity first and replaced only on strict improvement,
    so exact ties resolve toward scale 1.

    Returns ``(index, response, peak)`` for the winning scale, where
    ``peak`` is the unpenalized response maximum.
    """
    if len(scales) == 0:
        raise ValueError("need at least one scale")
    if any(s <= 0 for s in scales):
        raise ValueError("scales must be positive")
    if penalties is None:
        penalties = [1.0] * len(scales)
    order = sorted(range(len(scales)), key=lambda i: abs(math.log(scales[i])))
    best = None
    for i in order:
        resp = detect(model, sample_fn(scales[i]))
        peak = float(resp.max())
        score = peak * penalties[i]
        if best is None or score > best[0]:
            best = (score, i, resp, peak)
    return best[1], best[2], best[3]

"""Confidence-adaptive blending of the filter and color response maps.

Detection confidence is the average peak-to-correlation energy (APCE) of
the filter response: the squared response range over the mean squared
deviation from the minimum.  Sharp single-peak maps score high; flat or
multi-peak maps score low.  The blend weight follows a sigmoid of the
current APCE relative to its historical mean, and model updates are gated
on the same statistic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .corrfilter import ResponseMap


@dataclass
class FusionParams:
    """Base blend weight toward the color response and its confidence gain."""

    alpha: float = 0.25
    rho: float = 1.0
    invert: bool = False

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 0.5:
            raise ValueError("alpha must be in [0, 0.5]")
        if self.rho < 0:
            raise ValueError("rho must be >= 0")


class ConfidenceHistory:
    """Append-only per-frame APCE record with a running mean."""

    def __init__(self):
        self._values: list[float] = []
        self._sum = 0.0

    def append(self, value: float) -> None:
        self._values.append(float(value))
        self._sum += float(value)

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(self._values)

    @property
    def mean(self) -> float:
        return self._sum / len(self._values) if self._values else 0.0

    def __len__(self) -> int:
        return len(self._values)


def _values(response) -> np.ndarray:
    return np.asarray(getattr(response, "values", response), dtype=np.float64)


def apce(response) -> float:
    """Average peak-to-correlation energy of a response map.

    ``|max - min|^2 / mean((v - min)^2)``; a constant map returns 0.
    Invariant to adding a constant and to positive rescaling.
    """
    v = _values(response)
    if v.size == 0:
        raise ValueError("empty response")
    vmin = float(v.min())
    vmax = float(v.max())
    dev = float(np.mean((v - vmin) ** 2))
    if dev == 0.0:
        return 0.0
    return (vmax - vmin) ** 2 / dev


def relative_confidence(apce_t: float, history: ConfidenceHistory) -> float:
    """Current APCE over the mean of all APCEs including the current one.

    Neutral value 1 on the first frame or when the history is all zero.
    """
    if apce_t < 0:
        raise ValueError("apce must be >= 0")
    n = len(history)
    mean = (history.mean * n + apce_t) / (n + 1)
    if mean <= 0.0:
        return 1.0
    return apce_t / mean


def adaptive_alpha(r_t: float, params: FusionParams) -> float:
    """Sigmoid blend weight in (0, 2*alpha), equal to alpha at confidence 1.

    With the default direction the weight grows with relative confidence;
    ``params.invert`` flips the exponent so high filter confidence pushes
    the blend toward the filter response instead.
    """
    if r_t < 0:
        raise ValueError("relative confidence must be >= 0")
    arg = params.rho * (r_t - 1.0) if params.invert else params.rho * (1.0 - r_t)
    return 2.0 * params.alpha / (1.0 + np.exp(arg))


def fuse_responses(cf: ResponseMap, hist: ResponseMap, alpha_t: float) -> ResponseMap:
    """Pointwise blend (1 - alpha_t) * cf + alpha_t * hist on one shared grid."""
    if not 0.0 <= alpha_t <= 1.0:
        raise ValueError("alpha_t must be in [0, 1]")
    if not cf.same_grid(hist):
        raise ValueError("response grids do not match")
    return ResponseMap(
        (1.0 - alpha_t) * cf.values + alpha_t * hist.values,
        cf.cell_w,
        cf.cell_h,
        cf.origin_x,
        cf.origin_y,
    )


def update_gate(apce_t: float, history: ConfidenceHistory, margin: float = 1.0) -> bool:
    """True when the current APCE reaches ``margin`` times the historical mean.

    The mean excludes the current frame; an empty history always passes so
    the first tracked frame bootstraps the models.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    if len(history) == 0:
        return True
    return apce_t >= margin * history.mean


@dataclass
class FusionRecord:
    """Per-frame fusion diagnostics for reporting."""

    apce: float
    confidence: float
    alpha: float
    gate: bool
    scale_step: float = 1.0
    scale: float = 1.0
    peak: float = 0.0
    clamped: bool = False

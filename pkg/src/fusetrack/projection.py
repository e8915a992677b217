"""Grid resampling and learned linear channel reduction for feature stacks.

The reduction maps a D-channel feature stack onto C <= D channels through a
matrix learned once on the first tracked frame by minimizing a bilinear
least-squares objective (filter and matrix jointly) with Gauss-Newton steps
whose normal equations are solved by conjugate gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .features import feature_data


@dataclass(frozen=True)
class CubicKernel:
    """Keys cubic convolution kernel with 4-cell support.

    For any fractional position the weights over integer shifts sum to one,
    and the kernel reproduces linear fields exactly, so resampling a
    constant or a ramp introduces no error away from extrapolated ends.
    """

    a: float = -0.5
    support: int = 4

    def __call__(self, t) -> np.ndarray:
        t = np.abs(np.asarray(t, dtype=np.float64))
        a = self.a
        near = ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0
        far = ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a
        return np.where(t <= 1.0, near, np.where(t < 2.0, far, 0.0))


def _resample_axis(values: np.ndarray, target: int, kernel: CubicKernel) -> np.ndarray:
    """Resample along axis 0 to ``target`` samples spanning the same extent."""
    n = values.shape[0]
    if target == n:
        return values.copy()
    if n == 1:
        return np.repeat(values, target, axis=0)
    if target == 1:
        pos = np.array([(n - 1) / 2.0])
    else:
        pos = np.arange(target) * ((n - 1) / (target - 1))
    # linear extrapolation padding keeps constants and ramps exact at the ends
    pad = 2
    ext = np.concatenate(
        [
            values[0] + (values[0] - values[1]) * np.arange(pad, 0, -1).reshape((-1,) + (1,) * (values.ndim - 1)),
            values,
            values[-1] + (values[-1] - values[-2]) * np.arange(1, pad + 1).reshape((-1,) + (1,) * (values.ndim - 1)),
        ]
    )
    n0 = np.floor(pos).astype(np.intp) - 1
    out = np.zeros((target,) + values.shape[1:])
    for k in range(kernel.support):
        idx = n0 + k
        w = kernel(pos - idx)
        out += ext[idx + pad] * w.reshape((-1,) + (1,) * (values.ndim - 1))
    return out


def resample_channel(
    channel: np.ndarray,
    target_rows: int,
    target_cols: int,
    kernel: CubicKernel | None = None,
) -> np.ndarray:
    """Resample one 2-D channel onto a target grid covering the same extent.

    The corners of the source and target grids coincide, so identical dims
    return the input unchanged.
    """
    if target_rows < 1 or target_cols < 1:
        raise ValueError("target dims must be >= 1")
    kernel = kernel or CubicKernel()
    src = np.asarray(feature_data(channel))
    if src.ndim == 3 and src.shape[2] == 1:
        src = src[..., 0]
    if src.ndim != 2:
        raise ValueError("resample_channel expects a single-channel grid")
    out = _resample_axis(src, target_rows, kernel)
    return _resample_axis(out.T, target_cols, kernel).T


def apply_projection(features, matrix: np.ndarray) -> np.ndarray:
    """Mix D input channels into C output channels per cell: out = data @ matrix."""
    data = feature_data(features)
    matrix = np.asarray(matrix, dtype=np.float64)
    if data.shape[-1] != matrix.shape[0]:
        raise ValueError(
            f"channel mismatch: features have {data.shape[-1]}, matrix expects {matrix.shape[0]}"
        )
    return data @ matrix


def cg_solve(
    apply_a: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    iters: int = 50,
    tol: float = 1e-6,
) -> np.ndarray:
    """Conjugate gradient for a matrix-free SPD operator.

    Stops when the residual norm drops below ``tol * ||b||`` or after
    ``iters`` iterations.  Raises on non-finite intermediates.
    """
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b)
    r = b.copy()
    rs = float(r @ r)
    bnorm = math.sqrt(rs)
    if bnorm == 0.0:
        return x
    p = r.copy()
    for _ in range(iters):
        if math.sqrt(rs) <= tol * bnorm:
            break
        ap = np.asarray(apply_a(p))
        pap = float(p @ ap)
        if not np.isfinite(pap):
            raise FloatingPointError("non-finite curvature in conjugate gradient")
        if pap <= 0.0:
            break
        alpha = rs / pap
        x += alpha * p
        r -= alpha * ap
        rs_new = float(r @ r)
        if not np.isfinite(rs_new):
            raise FloatingPointError("non-finite residual in conjugate gradient")
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


@dataclass
class ProjectionFit:
    """Result of the joint filter/matrix optimization."""

    matrix: np.ndarray
    filt: np.ndarray
    objectives: list[float] = field(default_factory=list)


def _init_matrix(stacks: list[np.ndarray], c_dim: int, init) -> np.ndarray:
    d = stacks[0].shape[2]
    if isinstance(init, str):
        if init != "identity":
            raise ValueError(f"unknown projection init '{init}'")
        if c_dim != d:
            raise ValueError("identity init requires c_dim == channel count")
        return np.eye(d)
    if init is not None:
        p = np.array(init, dtype=np.float64)
        if p.shape != (d, c_dim):
            raise ValueError(f"init matrix must be {d}x{c_dim}, got {p.shape}")
        return p
    z = np.concatenate([x.reshape(-1, d) for x in stacks])
    z = z - z.mean(axis=0)
    _, vecs = np.linalg.eigh(z.T @ z)
    return vecs[:, ::-1][:, :c_dim].copy()


def learn_projection(
    samples: Sequence,
    labels: Sequence[np.ndarray],
    c_dim: int,
    filter_reg: float = 1e-3,
    matrix_reg: float = 1e-2,
    gn_iters: int = 5,
    cg_iters: int = 20,
    cg_tol: float = 1e-6,
    init=None,
) -> ProjectionFit:
    """Jointly learn a D->C channel mix and a C-channel detection filter.

    The data term measures, per training sample, how far the cyclic
    multi-channel convolution of the filter with the projected features
    falls from the desired response grid; uniform sample weights.  Ridge
    terms ``filter_reg`` and ``matrix_reg`` keep both factors bounded.

    The matrix starts from the top-C principal components of the samples'
    per-cell channel vectors (or from ``init``), the filter from the exact
    per-frequency ridge solution given that matrix.  Each Gauss-Newton step
    linearizes the bilinear data term, solves the normal equations with
    conjugate gradient and backtracks until the true objective does not
    increase, so the recorded objective sequence is non-increasing.
    """
    if not samples:
        raise ValueError("need at least one training sample")
    stacks = [feature_data(s) for s in samples]
    ys = [np.asarray(l, dtype=np.float64) for l in labels]
    if len(stacks) != len(ys):
        raise ValueError("samples and labels must pair up")
    rows, cols, d = stacks[0].shape
    for x, y in zip(stacks, ys):
        if x.shape != (rows, cols, d) or y.shape != (rows, cols):
            raise ValueError("all samples and labels must share one grid")
    if not 1 <= c_dim <= d:
        raise ValueError(f"c_dim must be in [1, {d}], got {c_dim}")

    m = len(stacks)
    wj = 1.0 / m
    zh = np.stack([np.fft.rfft2(x, axes=(0, 1)) for x in stacks])  # (m, rows, rc, d)
    yh = np.stack([np.fft.rfft2(y) for y in ys])

    def ridge_filter(pmat: np.ndarray) -> np.ndarray:
        a = zh @ pmat
        num = (np.conj(a) * yh[..., None]).sum(axis=0) * wj
        den = (np.conj(a)[..., :, None] * a[..., None, :]).sum(axis=0) * wj
        fh = np.linalg.solve(den + filter_reg * np.eye(c_dim), num[..., None])[..., 0]
        return np.fft.irfft2(fh, s=(rows, cols), axes=(0, 1))

    def objective(f: np.ndarray, pmat: np.ndarray) -> float:
        fh = np.fft.rfft2(f, axes=(0, 1))
        a = zh @ pmat
        data = 0.0
        for j in range(m):
            r = np.fft.irfft2((a[j] * fh).sum(axis=-1), s=(rows, cols)) - ys[j]
            data += wj * float(np.sum(r * r))
        val = data + filter_reg * float(np.sum(f * f)) + matrix_reg * float(np.sum(pmat * pmat))
        if not np.isfinite(val):
            raise FloatingPointError("non-finite projection objective")
        return val

    pmat = _init_matrix(stacks, c_dim, init)
    filt = ridge_filter(pmat)
    objs = [objective(filt, pmat)]

    nf = rows * cols * c_dim

    def pack(df, dp):
        return np.concatenate([df.ravel(), dp.ravel()])

    def unpack(v):
        return v[:nf].reshape(rows, cols, c_dim), v[nf:].reshape(d, c_dim)

    for _ in range(gn_iters):
        fh = np.fft.rfft2(filt, axes=(0, 1))
        a = zh @ pmat
        # q[j, ..., d, c]: response of filter channel c to raw feature channel d
        q = np.fft.irfft2(
            zh[..., :, None] * fh[None, :, :, None, :], s=(rows, cols), axes=(1, 2)
        )
        resid = np.stack(
            [np.fft.irfft2((a[j] * fh).sum(axis=-1), s=(rows, cols)) - ys[j] for j in range(m)]
        )

        def jmap(df, dp):
            dfh = np.fft.rfft2(df, axes=(0, 1))
            out = np.empty((m, rows, cols))
            for j in range(m):
                out[j] = np.fft.irfft2((a[j] * dfh).sum(axis=-1), s=(rows, cols))
                out[j] += np.tensordot(q[j], dp, axes=([2, 3], [0, 1]))
            return out

        def jt(res):
            gf = np.zeros((rows, cols, c_dim))
            gp = np.zeros((d, c_dim))
            for j in range(m):
                rh = np.fft.rfft2(res[j])
                gf += wj * np.fft.irfft2(
                    np.conj(a[j]) * rh[..., None], s=(rows, cols), axes=(0, 1)
                )
                gp += wj * np.tensordot(q[j], res[j], axes=([0, 1], [0, 1]))
            return gf, gp

        def apply_normal(v):
            df, dp = unpack(v)
            gf, gp = jt(jmap(df, dp))
            return pack(gf + filter_reg * df, gp + matrix_reg * dp)

        gf0, gp0 = jt(resid)
        rhs = -pack(gf0 + filter_reg * filt, gp0 + matrix_reg * pmat)
        step = cg_solve(apply_normal, rhs, iters=cg_iters, tol=cg_tol)
        df, dp = unpack(step)

        accepted = objs[-1]
        t = 1.0
        while t > 1e-8:
            cand = objective(filt + t * df, pmat + t * dp)
            if cand <= objs[-1] + 1e-12:
                filt = filt + t * df
                pmat = pmat + t * dp
                accepted = cand
                break
            t *= 0.5
        objs.append(accepted)

    return ProjectionFit(pmat, filt, objs)

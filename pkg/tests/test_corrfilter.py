import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fusetrack.corrfilter import (
    FilterModel,
    ResponseMap,
    detect,
    gaussian_label,
    sample_stats,
    scale_search,
    train_filter,
    update_filter,
)


def spatial_response(filt, feats):
    """Brute-force cyclic multi-channel convolution, O(N^2) per channel."""
    rows, cols, ch = feats.shape
    out = np.zeros((rows, cols))
    for c in range(ch):
        for dy in range(rows):
            for dx in range(cols):
                out += filt[dy, dx, c] * np.roll(np.roll(feats[..., c], dy, axis=0), dx, axis=1)
    return out


def dense_ridge_filter(feats, label, lam):
    """Direct spatial-domain ridge regression over all cyclic shifts."""
    rows, cols, ch = feats.shape
    n = rows * cols
    blocks = []
    for c in range(ch):
        cols_mat = np.empty((n, n))
        k = 0
        for dy in range(rows):
            for dx in range(cols):
                cols_mat[:, k] = np.roll(np.roll(feats[..., c], dy, axis=0), dx, axis=1).ravel()
                k += 1
        blocks.append(cols_mat)
    x = np.hstack(blocks)
    h = np.linalg.solve(x.T @ x + lam * np.eye(ch * n), x.T @ label.ravel())
    return h.reshape(ch, rows, cols).transpose(1, 2, 0)


class TestGaussianLabel:
    def test_peak_at_zero_shift(self):
        lab = gaussian_label(7, 9, 1.3)
        assert lab[0, 0] == 1.0
        assert lab.max() == 1.0

    def test_wide_sigma_approaches_one(self):
        lab = gaussian_label(3, 3, 1e9)
        assert np.allclose(lab, 1.0, atol=1e-12)

    def test_unit_shift_value(self):
        lab = gaussian_label(5, 5, 1.0)
        assert lab[0, 1] == pytest.approx(np.exp(-0.5))
        assert lab[1, 0] == pytest.approx(np.exp(-0.5))

    def test_cyclic_symmetry(self):
        lab = gaussian_label(6, 6, 1.5)
        assert lab[0, 1] == pytest.approx(lab[0, 5])
        assert lab[1, 0] == pytest.approx(lab[5, 0])

    def test_rejects_bad_sigma(self):
        with pytest.raises(ValueError):
            gaussian_label(4, 4, 0.0)


class TestTrainFilter:
    def test_scalar_case(self):
        # one cell, one channel: filter = x*y / x^2
        model = train_filter(np.full((1, 1, 1), 2.0), np.ones((1, 1)), lam=0.0)
        assert model.filt_hat[0, 0, 0] == pytest.approx(0.5)

    def test_zero_features_give_zero_filter(self):
        model = train_filter(np.zeros((4, 4, 2)), gaussian_label(4, 4, 1.0), lam=1e-3)
        assert np.all(model.num == 0.0)
        assert np.all(model.filt_hat == 0.0)

    def test_matches_dense_spatial_ridge(self):
        rng = np.random.default_rng(0)
        feats = rng.normal(size=(4, 4, 2))
        label = gaussian_label(4, 4, 1.0)
        lam = 1e-2
        model = train_filter(feats, label, lam)
        filt = np.fft.irfft2(model.filt_hat, s=(4, 4), axes=(0, 1))
        dense = dense_ridge_filter(feats, label, lam)
        assert np.max(np.abs(filt - dense)) <= 1e-6

    def test_per_frequency_solve_is_exact(self):
        rng = np.random.default_rng(1)
        feats = rng.normal(size=(4, 4, 3))
        model = train_filter(feats, gaussian_label(4, 4, 1.0), lam=1e-3)
        lhs = np.einsum("...ij,...j->...i", model.den, model.filt_hat) + 1e-3 * model.filt_hat
        assert np.max(np.abs(lhs - model.num)) <= 1e-9

    def test_denominator_is_hermitian(self):
        rng = np.random.default_rng(2)
        feats = rng.normal(size=(6, 5, 3))
        model = train_filter(feats, gaussian_label(6, 5, 1.0), lam=1e-3)
        assert np.max(np.abs(model.den - np.conj(np.swapaxes(model.den, -1, -2)))) <= 1e-9

    def test_grid_mismatch_raises(self):
        with pytest.raises(ValueError):
            train_filter(np.zeros((4, 4, 1)), np.zeros((4, 5)), lam=1e-3)


class TestDetect:
    def test_training_sample_reproduces_label(self):
        rng = np.random.default_rng(3)
        feats = rng.normal(size=(8, 8, 2))
        label = gaussian_label(8, 8, 1.5)
        model = train_filter(feats, label, lam=1e-10)
        resp = detect(model, feats)
        assert np.max(np.abs(resp - label)) <= 1e-6

    def test_zero_features_give_zero_response(self):
        rng = np.random.default_rng(4)
        model = train_filter(rng.normal(size=(4, 4, 2)), gaussian_label(4, 4, 1.0), lam=1e-3)
        assert np.allclose(detect(model, np.zeros((4, 4, 2))), 0.0)

    def test_matches_brute_force_spatial_correlation(self):
        rng = np.random.default_rng(5)
        feats = rng.normal(size=(8, 8, 1))
        model = train_filter(feats, gaussian_label(8, 8, 1.0), lam=1e-2)
        z = rng.normal(size=(8, 8, 1))
        filt = np.fft.irfft2(model.filt_hat, s=(8, 8), axes=(0, 1))
        assert np.max(np.abs(detect(model, z) - spatial_response(filt, z))) <= 1e-6

    def test_cyclic_shift_moves_the_peak(self):
        rng = np.random.default_rng(6)
        feats = rng.normal(size=(8, 8, 2))
        model = train_filter(feats, gaussian_label(8, 8, 1.0), lam=1e-3)
        base = detect(model, feats)
        by, bx = np.unravel_index(np.argmax(base), base.shape)
        shifted = np.roll(np.roll(feats, 3, axis=0), 2, axis=1)
        resp = detect(model, shifted)
        sy, sx = np.unravel_index(np.argmax(resp), resp.shape)
        assert (sy, sx) == ((by + 3) % 8, (bx + 2) % 8)

    def test_linear_in_feature_scale(self):
        rng = np.random.default_rng(7)
        feats = rng.normal(size=(6, 6, 2))
        model = train_filter(feats, gaussian_label(6, 6, 1.0), lam=1e-3)
        r1 = detect(model, feats)
        r3 = detect(model, 3.0 * feats)
        assert np.allclose(r3, 3.0 * r1, atol=1e-9)
        assert np.argmax(r3) == np.argmax(r1)

    def test_shape_mismatch_raises(self):
        model = train_filter(np.zeros((4, 4, 2)), gaussian_label(4, 4, 1.0), lam=1e-3)
        with pytest.raises(ValueError):
            detect(model, np.zeros((4, 4, 3)))


class TestUpdateFilter:
    @staticmethod
    def _model(rng):
        return train_filter(rng.normal(size=(4, 4, 2)), gaussian_label(4, 4, 1.0), lam=1e-3)

    def test_zero_rate_is_noop(self):
        rng = np.random.default_rng(8)
        model = self._model(rng)
        num, den = sample_stats(
            np.fft.rfft2(rng.normal(size=(4, 4, 2)), axes=(0, 1)),
            np.fft.rfft2(gaussian_label(4, 4, 1.0)),
        )
        out = update_filter(model, num, den, 0.0)
        assert np.array_equal(out.num, model.num)
        assert np.array_equal(out.den, model.den)

    def test_full_rate_replaces(self):
        rng = np.random.default_rng(9)
        model = self._model(rng)
        num, den = sample_stats(
            np.fft.rfft2(rng.normal(size=(4, 4, 2)), axes=(0, 1)),
            np.fft.rfft2(gaussian_label(4, 4, 1.0)),
        )
        out = update_filter(model, num, den, 1.0)
        assert np.allclose(out.num, num)
        assert np.allclose(out.den, den)

    def test_scalar_blend(self):
        model = FilterModel(
            np.full((1, 1, 1), 1.0 + 0j), np.full((1, 1, 1, 1), 1.0 + 0j), 1e-3, cols=1
        )
        out = update_filter(model, np.full((1, 1, 1), 3.0 + 0j), np.full((1, 1, 1, 1), 3.0 + 0j), 0.5)
        assert out.num[0, 0, 0] == pytest.approx(2.0)
        assert out.den[0, 0, 0, 0] == pytest.approx(2.0)

    @settings(max_examples=30)
    @given(lr=st.floats(0.0, 1.0))
    def test_contraction_toward_new_stats(self, lr):
        rng = np.random.default_rng(10)
        model = self._model(rng)
        num, den = sample_stats(
            np.fft.rfft2(rng.normal(size=(4, 4, 2)), axes=(0, 1)),
            np.fft.rfft2(gaussian_label(4, 4, 1.0)),
        )
        out = update_filter(model, num, den, lr)
        before = np.abs(model.num - num).max()
        after = np.abs(out.num - num).max()
        assert after <= (1.0 - lr) * before + 1e-12

    def test_hermitian_preserved(self):
        rng = np.random.default_rng(11)
        model = self._model(rng)
        num, den = sample_stats(
            np.fft.rfft2(rng.normal(size=(4, 4, 2)), axes=(0, 1)),
            np.fft.rfft2(gaussian_label(4, 4, 1.0)),
        )
        out = update_filter(model, num, den, 0.3)
        assert np.max(np.abs(out.den - np.conj(np.swapaxes(out.den, -1, -2)))) <= 1e-9

    def test_bad_rate_raises(self):
        rng = np.random.default_rng(12)
        model = self._model(rng)
        with pytest.raises(ValueError):
            update_filter(model, model.num, model.den, 1.5)


class TestScaleSearch:
    def test_single_scale_equals_detect(self):
        rng = np.random.default_rng(13)
        feats = rng.normal(size=(6, 6, 2))
        model = train_filter(feats, gaussian_label(6, 6, 1.0), lam=1e-3)
        idx, resp, peak = scale_search(model, lambda s: feats, [1.0])
        assert idx == 0
        assert np.array_equal(resp, detect(model, feats))
        assert peak == pytest.approx(detect(model, feats).max())

    def test_matching_scale_wins(self):
        rng = np.random.default_rng(14)
        feats = rng.normal(size=(6, 6, 2))
        model = train_filter(feats, gaussian_label(6, 6, 1.0), lam=1e-3)
        noise = rng.normal(size=(6, 6, 2)) * 0.1

        def sample(s):
            return feats if s == 1.0 else noise

        idx, _, _ = scale_search(model, sample, [0.98, 1.0, 1.02])
        assert idx == 1

    def test_tie_prefers_unity(self):
        rng = np.random.default_rng(15)
        feats = rng.normal(size=(6, 6, 2))
        model = train_filter(feats, gaussian_label(6, 6, 1.0), lam=1e-3)
        idx, _, _ = scale_search(model, lambda s: feats, [0.98, 1.0, 1.02])
        assert idx == 1

    def test_rejects_empty_or_negative(self):
        rng = np.random.default_rng(16)
        model = train_filter(rng.normal(size=(4, 4, 1)), gaussian_label(4, 4, 1.0), lam=1e-3)
        with pytest.raises(ValueError):
            scale_search(model, lambda s: None, [])
        with pytest.raises(ValueError):
            scale_search(model, lambda s: None, [1.0, -0.5])


class TestResponseMap:
    def test_grid_comparison(self):
        a = ResponseMap(np.zeros((3, 3)), 2.0, 2.0, 1.0, 1.0)
        b = ResponseMap(np.ones((3, 3)), 2.0, 2.0, 1.0, 1.0)
        c = ResponseMap(np.ones((3, 3)), 2.5, 2.0, 1.0, 1.0)
        assert a.same_grid(b)
        assert not a.same_grid(c)

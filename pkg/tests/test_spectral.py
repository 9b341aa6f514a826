import numpy as np
import pytest
from scipy import signal

from sewnet.fgn import synth_fgn
from sewnet.network import ModelConfig
from sewnet.spectral import (
    fit_spectrum,
    spectral_loss,
    spectral_slope,
    welch_psd,
)


class TestWelchPsd:
    def test_white_noise_is_flat_at_unit_level(self):
        x = np.random.default_rng(0).standard_normal(2**14)
        f, psd = welch_psd(x, segment=256, overlap=0.5)
        band = (f >= 0.05) & (f <= 0.45)
        # unit-variance white noise has a flat one-sided density of 2
        assert 0.9 * 2.0 <= psd[band].mean() <= 1.1 * 2.0

    def test_sinusoid_peaks_at_its_frequency(self):
        t = np.arange(4096)
        x = np.sin(2 * np.pi * 0.125 * t)
        f, psd = welch_psd(x, segment=256)
        assert abs(f[np.argmax(psd)] - 0.125) <= 1.0 / 256

    def test_parseval_within_five_percent(self):
        x = np.random.default_rng(1).standard_normal(2**14)
        f, psd = welch_psd(x, segment=256)
        total = psd.sum() / 256  # df = 1/segment
        assert abs(total - x.var()) <= 0.05 * x.var()

    def test_matches_scipy_welch(self):
        x = np.random.default_rng(2).standard_normal(8192)
        f, psd = welch_psd(x, segment=256, overlap=0.5)
        f_sp, psd_sp = signal.welch(x, nperseg=256, noverlap=128, window="hann")
        assert np.abs(f - f_sp[1:]).max() <= 1e-12
        assert np.abs(psd - psd_sp[1:]).max() <= 1e-8 * psd_sp.max()

    def test_segment_longer_than_series_rejected(self):
        with pytest.raises(ValueError, match="segment"):
            welch_psd(np.zeros(100), segment=256)


class TestSpectralSlope:
    def test_exact_power_law(self):
        f = np.linspace(1 / 256, 0.5, 128)
        psd = f**-0.5
        beta, _ = spectral_slope(f, psd, (f[0], 0.5))
        assert abs(beta - 0.5) <= 1e-10

    def test_white_noise_slope_zero(self):
        x = np.random.default_rng(3).standard_normal(2**14)
        fit = fit_spectrum(x)
        assert abs(fit.beta) <= 0.1

    def test_fgn_follows_power_law(self):
        # increments with exponent H have spectrum ~ f^-(2H-1)
        x = synth_fgn(0.7, 2**14, seed=4)
        fit = fit_spectrum(x.values)
        assert abs(fit.beta - 0.4) <= 0.1

    def test_too_few_bins_rejected(self):
        f = np.linspace(0.01, 0.5, 64)
        with pytest.raises(ValueError, match="5 bins"):
            spectral_slope(f, np.ones(64), (0.01, 0.012))


class TestSpectralLoss:
    def welch_config(self, **kw):
        return ModelConfig(L=1, n_filters=4, spec_loss="welch", **kw)

    def test_off_mode_is_zero(self):
        config = ModelConfig(spec_loss="off")
        assert spectral_loss(np.random.default_rng(0).standard_normal((8, 64)), 0.5, config) == 0.0

    def test_variance_surrogate_values(self):
        config = ModelConfig(spec_loss="variance_surrogate")
        targets = np.random.default_rng(5).standard_normal(4096)
        loss = spectral_loss(targets, 0.5, config)
        assert loss == (targets.var() - 1.0) ** 2
        assert loss <= 1e-3
        # no gradient path exists by construction
        _, grad = spectral_loss(targets, 0.5, config, with_grad=True)
        assert grad is None

    def test_self_consistent_fgn_batch_scores_small(self):
        rng_seeds = range(64)
        batch = np.stack([synth_fgn(0.7, 256, seed=1000 + s).values for s in rng_seeds])
        config = self.welch_config()
        loss = spectral_loss(batch, 0.7, config)
        # slope term alone must be small; subtract the shape part
        _, psd_only = welch_psd(batch.ravel(), 256)  # smoke: batch is valid
        assert loss >= 0.0
        fit_term = spectral_loss(batch, 0.7, ModelConfig(spec_loss="welch", lambda_shape=0.0))
        assert fit_term <= 0.02

    def test_shape_term_invariant_to_amplitude(self):
        rng = np.random.default_rng(6)
        batch = rng.standard_normal((16, 256))
        config = ModelConfig(spec_loss="welch", lambda_shape=0.1)
        slope_only = ModelConfig(spec_loss="welch", lambda_shape=0.0)
        shape1 = spectral_loss(batch, 0.5, config) - spectral_loss(batch, 0.5, slope_only)
        shape3 = spectral_loss(3.0 * batch, 0.5, config) - spectral_loss(3.0 * batch, 0.5, slope_only)
        assert abs(shape1 - shape3) <= 1e-10

    def test_welch_mode_needs_a_real_batch(self):
        config = self.welch_config()
        with pytest.raises(ValueError, match="batch"):
            spectral_loss(np.zeros((4, 64)), 0.5, config)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        batch = rng.standard_normal((8, 64))
        config = ModelConfig(spec_loss="welch", lambda_shape=0.1)
        loss, grad = spectral_loss(batch, 0.6, config, with_grad=True)
        eps = 1e-6
        for idx in [(0, 0), (3, 17), (7, 63), (5, 32)]:
            up = batch.copy(); up[idx] += eps
            dn = batch.copy(); dn[idx] -= eps
            fd = (spectral_loss(up, 0.6, config) - spectral_loss(dn, 0.6, config)) / (2 * eps)
            assert abs(grad[idx] - fd) <= 1e-5 * max(1.0, abs(fd))

    def test_slope_term_zero_when_matched(self):
        # exact power-law psd is unreachable from finite samples, so check
        # the analytic limit instead: loss at the fitted beta equals shape only
        rng = np.random.default_rng(8)
        batch = rng.standard_normal((16, 256))
        slope_only = ModelConfig(spec_loss="welch", lambda_shape=0.0)
        from sewnet.spectral import fit_spectrum

        fit = fit_spectrum(batch.ravel(), 256)
        h_matched = (fit.beta + 1.0) / 2.0
        # not exactly zero (batch psd vs pooled psd differ slightly), but tiny
        assert spectral_loss(batch, h_matched, slope_only) <= 5e-3

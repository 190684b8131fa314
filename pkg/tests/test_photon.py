import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisesynth import (
    DegenerateFitError,
    FrameMeta,
    GainModel,
    InsufficientDataError,
    PlanarImage,
    ShapeMismatchError,
    VarianceSamples,
    collect_variance_pairs,
    collect_variance_single,
    fit_gain,
    sample_poisson_signal,
    substream,
    synthesize_noisy,
)


def poisson_image(levels, g, seed, shape, black=0.0):
    """y = g * Poisson(x / g) + black for a per-pixel level map."""
    rng = substream(seed, 0)
    return PlanarImage(g * rng.poisson(levels / g) + black)


class TestCollectVarianceSingle:
    def test_noiseless_ramp_has_no_variance(self, meta):
        w = 256
        ramp = np.broadcast_to(np.linspace(0.0, 500.0, w), (64, w))
        img = PlanarImage((ramp + meta.black_level)[None, :, :])
        samples = collect_variance_single(img, meta)
        assert len(samples) >= 2
        assert samples.variance.max() < 1e-6

    def test_recovers_known_poisson_gain(self, meta):
        # flat strips at 5 levels, pure shot noise with known g
        g = 4.0
        strip_levels = [500.0, 2000.0, 4000.0, 7000.0, 10000.0]
        levels = np.zeros((1, 256, 255))
        for i, lv in enumerate(strip_levels):
            levels[0, :, i * 51 : (i + 1) * 51] = lv
        noisy = poisson_image(levels, g, seed=5, shape=levels.shape, black=meta.black_level)
        model = fit_gain(collect_variance_single(noisy, meta), meta.iso)
        assert abs(model.gain - g) / g < 0.15

    def test_clipped_half_excluded(self, meta):
        data = np.empty((1, 64, 128))
        data[0, :, :64] = np.linspace(1000.0, 2000.0, 64)[None, :] + meta.black_level
        data[0, :, 64:] = meta.white_level
        samples = collect_variance_single(PlanarImage(data), meta, min_weight=9)
        assert samples.level.max() < 0.98 * meta.white_level - meta.black_level

    def test_constant_image_insufficient(self, meta):
        img = PlanarImage(np.full((1, 64, 64), 900.0))
        with pytest.raises(InsufficientDataError):
            collect_variance_single(img, meta)

    def test_too_small_for_margin(self, meta):
        with pytest.raises(InsufficientDataError):
            collect_variance_single(PlanarImage(np.zeros((1, 8, 8))), meta)


class TestCollectVariancePairs:
    def _ramp(self, top, shape=(2, 64, 64)):
        c, h, w = shape
        ramp = np.broadcast_to(np.linspace(0.0, top, w), (h, w))
        return PlanarImage(np.broadcast_to(ramp, shape))

    def test_identical_pair_zero_variance(self, meta):
        clean = self._ramp(1000.0)
        samples = collect_variance_pairs([(clean, clean)], meta, min_weight=9)
        assert len(samples) >= 2
        assert samples.variance.max() == 0.0

    def test_recovers_slope_and_intercept(self, meta):
        # shot noise with g=2.5 on top of Gaussian read noise of variance 9
        g, read_var = 2.5, 9.0
        clean = self._ramp(200.0, (4, 256, 256))
        rng = substream(21, 0)
        noisy = PlanarImage(
            g * rng.poisson(clean.data / g) + rng.normal(0.0, np.sqrt(read_var), clean.shape)
        )
        samples = collect_variance_pairs([(clean, noisy)], meta, bin_width=2.0)
        model = fit_gain(samples, meta.iso)
        assert abs(model.gain - g) / g < 0.05
        assert abs(model.var_intercept - read_var) / read_var < 0.10

    def test_constant_clean_single_group(self, meta):
        clean = PlanarImage(np.full((1, 64, 64), 500.0))
        with pytest.raises(InsufficientDataError):
            collect_variance_pairs([(clean, clean)], meta)

    def test_shape_mismatch(self, meta, rng):
        a = PlanarImage(rng.normal(size=(1, 4, 4)))
        b = PlanarImage(rng.normal(size=(1, 4, 5)))
        with pytest.raises(ShapeMismatchError):
            collect_variance_pairs([(a, b)], meta)


class TestFitGain:
    def test_two_point_line(self):
        samples = VarianceSamples([10.0, 20.0], [25.0, 45.0], [100.0, 100.0])
        model = fit_gain(samples, iso=800)
        assert model.gain == pytest.approx(2.0)
        assert model.var_intercept == pytest.approx(5.0)
        assert model.fit_points == 2

    def test_exact_proportional_line(self):
        levels = np.array([5.0, 10.0, 20.0, 40.0, 80.0])
        samples = VarianceSamples(levels, 3.0 * levels, np.full(5, 200.0))
        model = fit_gain(samples, iso=100)
        assert model.gain == pytest.approx(3.0, rel=1e-12)
        assert model.var_intercept == 0.0
        assert model.fit_r2 == pytest.approx(1.0, abs=1e-12)

    @given(
        g=st.floats(0.1, 50.0),
        intercept=st.floats(0.0, 100.0),
        seed=st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=60, deadline=None)
    def test_collinear_inputs_recovered_exactly(self, g, intercept, seed):
        rng = np.random.default_rng(seed)
        levels = np.sort(rng.uniform(1.0, 1000.0, size=6))
        if np.any(np.diff(levels) < 1e-6):
            return
        weights = rng.integers(100, 1000, size=6).astype(float)
        samples = VarianceSamples(levels, g * levels + intercept, weights)
        model = fit_gain(samples, iso=100)
        assert abs(model.gain - g) <= 1e-12 * g
        assert abs(model.var_intercept - intercept) <= 1e-9 * max(intercept, 1.0)

    def test_negative_slope_degenerate(self):
        samples = VarianceSamples([10.0, 20.0, 30.0], [50.0, 30.0, 10.0], [100.0] * 3)
        with pytest.raises(DegenerateFitError):
            fit_gain(samples, iso=100)

    def test_single_group_insufficient(self):
        with pytest.raises(InsufficientDataError):
            fit_gain(VarianceSamples([10.0], [25.0], [100.0]), iso=100)

    def test_robust_option_resists_outlier(self):
        levels = np.arange(1.0, 12.0)
        var = 2.0 * levels + 1.0
        var[5] = 500.0
        samples = VarianceSamples(levels, var, np.full(11, 100.0))
        model = fit_gain(samples, iso=100, robust=True)
        assert model.gain == pytest.approx(2.0, rel=0.05)

    def test_weights_matter(self):
        # heavily weighted points dominate the weighted fit
        samples = VarianceSamples([10.0, 20.0, 30.0], [25.0, 45.0, 200.0],
                                  [10000.0, 10000.0, 1.0])
        model = fit_gain(samples, iso=100)
        assert model.gain == pytest.approx(2.0, rel=0.05)


class TestGainModel:
    def test_json_round_trip(self):
        model = GainModel(iso=1600, gain=1.8, var_intercept=32.5, fit_points=40, fit_r2=0.998)
        payload = json.loads(model.to_json())
        assert list(payload) == ["iso", "gain", "var_intercept", "fit_points", "fit_r2"]
        assert GainModel.from_json(model.to_json()) == model

    def test_validation(self):
        with pytest.raises(ValueError):
            GainModel(iso=100, gain=0.0, var_intercept=0.0, fit_points=2, fit_r2=1.0)
        with pytest.raises(ValueError):
            GainModel(iso=100, gain=1.0, var_intercept=-1.0, fit_points=2, fit_r2=1.0)


class TestSamplePoissonSignal:
    def test_zero_clean_is_zero(self):
        clean = PlanarImage(np.zeros((2, 16, 16)))
        out = sample_poisson_signal(clean, g=2.0, ratio=1.0, seed=0)
        np.testing.assert_array_equal(out.data, 0.0)

    def test_moments_match_poisson_theory(self):
        # oracle: for y = g*Poisson(c/g), E[y]=c, Var[y]=g*c,
        # Var of the sample variance ~ (mu4 - sigma^4)/n
        c, g, n = 400.0, 2.0, 10**6
        clean = PlanarImage(np.full((1, 1000, 1000), c))
        out = sample_poisson_signal(clean, g=g, ratio=1.0, seed=3)
        lam = c / g
        mean_sd = np.sqrt(g * c / n)
        assert abs(out.data.mean() - c) < 3 * mean_sd
        var = out.data.var(ddof=1)
        mu4 = g**4 * (lam + 3 * lam**2)
        var_sd = np.sqrt((mu4 - (g * g * lam) ** 2) / n)
        assert abs(var - g * c) < 3 * var_sd

    def test_exposure_ratio_scaling(self):
        c, g, ratio, n = 400.0, 2.0, 100.0, 10**6
        clean = PlanarImage(np.full((1, 1000, 1000), c))
        out = sample_poisson_signal(clean, g=g, ratio=ratio, seed=4)
        mean_sd = np.sqrt(g * c / ratio / n)
        assert abs(out.data.mean() - c / ratio) < 3 * mean_sd

    def test_mean_decreases_with_ratio(self):
        clean = PlanarImage(np.full((1, 512, 512), 900.0))
        means = [sample_poisson_signal(clean, 1.8, r, seed=6).data.mean() for r in (1, 4, 16)]
        assert means[0] > means[1] > means[2]

    def test_deterministic_per_seed(self, rng):
        clean = PlanarImage(rng.uniform(0, 100, size=(2, 32, 32)))
        a = sample_poisson_signal(clean, 2.0, 1.0, seed=9)
        b = sample_poisson_signal(clean, 2.0, 1.0, seed=9)
        np.testing.assert_array_equal(a.data, b.data)

    def test_rejects_bad_inputs(self, rng):
        clean = PlanarImage(rng.uniform(0, 10, size=(1, 4, 4)))
        with pytest.raises(ValueError):
            sample_poisson_signal(clean, g=0.0)
        with pytest.raises(ValueError):
            sample_poisson_signal(clean, g=1.0, ratio=0.5)
        with pytest.raises(ValueError, match="non-negative"):
            sample_poisson_signal(PlanarImage(-np.ones((1, 2, 2))), g=1.0)


class TestSynthesizeNoisy:
    def _model(self):
        return GainModel(iso=1600, gain=2.0, var_intercept=10.0, fit_points=8, fit_r2=0.99)

    def test_offset_cancellation(self, meta):
        clean = PlanarImage(np.zeros((1, 8, 8)))
        dark = PlanarImage(np.full((1, 8, 8), meta.black_level))
        out = synthesize_noisy(clean, self._model(), dark, meta, seed=1)
        np.testing.assert_array_equal(out.data, 0.0)

    def test_quantize_integral_and_clipped(self, meta, rng):
        clean = PlanarImage(rng.uniform(0, 200, size=(2, 32, 32)))
        dark = PlanarImage(rng.normal(meta.black_level, 600.0, size=(2, 32, 32)).clip(0))
        out = synthesize_noisy(clean, self._model(), dark, meta, quantize=True, seed=2)
        np.testing.assert_array_equal(out.data, np.rint(out.data))
        assert out.data.min() >= -meta.black_level
        assert out.data.max() <= meta.white_level - meta.black_level

    def test_shape_mismatch(self, meta, rng):
        clean = PlanarImage(rng.uniform(0, 10, size=(1, 4, 4)))
        dark = PlanarImage(rng.uniform(0, 10, size=(1, 4, 5)))
        with pytest.raises(ShapeMismatchError):
            synthesize_noisy(clean, self._model(), dark, meta)

    def test_deterministic(self, meta, rng):
        clean = PlanarImage(rng.uniform(0, 100, size=(2, 16, 16)))
        dark = PlanarImage(rng.normal(meta.black_level, 5.0, size=(2, 16, 16)))
        a = synthesize_noisy(clean, self._model(), dark, meta, seed=7)
        b = synthesize_noisy(clean, self._model(), dark, meta, seed=7)
        np.testing.assert_array_equal(a.data, b.data)

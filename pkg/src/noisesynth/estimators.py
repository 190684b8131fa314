"""Scikit-learn style estimators wrapping the synthesis and gain fits.

Both classes follow the fit/attribute convention (``get_params`` /
``set_params`` via :class:`sklearn.base.BaseEstimator`, constructor
stores hyperparameters untouched, fitted state lands in trailing-
underscore attributes), so they compose with pipelines, cloning, and
hyperparameter search.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .photon import (
    DEFAULT_PSEUDO_SIGMA,
    MIN_GROUP_WEIGHT,
    GainModel,
    collect_variance_pairs,
    collect_variance_single,
    fit_gain,
)
from .planar import FrameMeta, PlanarImage
from .synthesis import SynthesisConfig, _Sampler


def _as_planar(X) -> PlanarImage:
    if isinstance(X, PlanarImage):
        return X
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3:
        raise ValueError(f"expected (C, H, W) or (H, W) input, got shape {arr.shape}")
    return PlanarImage(arr)


class DarkFrameSynthesizer(BaseEstimator):
    """Generative model of a sensor's signal-independent noise.

    ``fit`` learns the fixed pattern, channel offsets, sorted residual
    values, and magnitude spectrum of one reference dark frame;
    ``sample`` then draws any number of new frames with the same
    spectral and marginal statistics.

    Parameters
    ----------
    sigma : float
        Blur scale separating the fixed pattern from the residual.
    iterations : int
        Histogram/spectrum refinement passes per draw.
    shared_phase : bool
        Share one random phase field across channels (keeps
        inter-channel correlation); False draws per-channel fields.
    histogram_matching : bool
        Disable to skip refinement entirely (ablation).
    seed : int
        Base seed; draw k uses substream (seed, k).
    """

    def __init__(
        self,
        sigma: float = 50.0,
        iterations: int = 10,
        shared_phase: bool = True,
        histogram_matching: bool = True,
        seed: int = 0,
    ):
        self.sigma = sigma
        self.iterations = iterations
        self.shared_phase = shared_phase
        self.histogram_matching = histogram_matching
        self.seed = seed

    def _config(self) -> SynthesisConfig:
        return SynthesisConfig(
            sigma=self.sigma,
            iterations=self.iterations,
            seed=self.seed,
            shared_phase=self.shared_phase,
            histogram_matching=self.histogram_matching,
        )

    def fit(self, X, y=None) -> "DarkFrameSynthesizer":
        """Learn the reference frame's noise statistics.

        X is a PlanarImage or (C, H, W) array; y is ignored.
        """
        dark = _as_planar(X)
        self._sampler = _Sampler(dark, self._config())
        self.decomposition_ = self._sampler.decomposition
        self.n_channels_ = dark.channels
        self.frame_shape_ = dark.shape
        return self

    def _check_fitted(self) -> None:
        if not hasattr(self, "_sampler"):
            raise NotFittedError("this DarkFrameSynthesizer is not fitted; call fit first")

    def sample(self, n_frames: int = 1, start_index: int = 0) -> list[PlanarImage]:
        """Draw synthetic dark frames; frame k is substream (seed, start_index+k)."""
        self._check_fitted()
        return [self._sampler.draw_frame(start_index + i)[0] for i in range(n_frames)]

    def sample_residual(self, draw_index: int = 0) -> PlanarImage:
        """One synthetic residual (no fixed pattern or offsets added back)."""
        self._check_fitted()
        noise, _ = self._sampler.draw_residual(draw_index)
        return self.decomposition_.residual.with_data(noise)


class SystemGainEstimator(BaseEstimator):
    """Photon-transfer gain fit, runnable from minimal data.

    ``fit(X)`` with a single noisy frame uses the pseudo-clean
    (blur-based) estimator; ``fit(X, y)`` with matching clean frames
    uses the pair-based estimator. Fitted state: ``gain_``,
    ``var_intercept_``, ``fit_r2_``, ``fit_points_``, ``model_``.
    """

    def __init__(
        self,
        pseudo_sigma: float = DEFAULT_PSEUDO_SIGMA,
        bin_width: float | None = None,
        min_weight: int = MIN_GROUP_WEIGHT,
        robust: bool = False,
    ):
        self.pseudo_sigma = pseudo_sigma
        self.bin_width = bin_width
        self.min_weight = min_weight
        self.robust = robust

    def fit(self, X, y=None, *, meta: FrameMeta) -> "SystemGainEstimator":
        """Estimate the gain from noisy frame(s) X, optionally paired with clean y.

        X (and y) may be a single image or a list; with y given, pairs
        are formed positionally and pooled into shared level buckets.
        """
        noisy = [_as_planar(x) for x in (X if isinstance(X, (list, tuple)) else [X])]
        if y is not None:
            clean = [_as_planar(c) for c in (y if isinstance(y, (list, tuple)) else [y])]
            if len(clean) != len(noisy):
                raise ValueError(f"{len(noisy)} noisy frames vs {len(clean)} clean frames")
            samples = collect_variance_pairs(
                list(zip(clean, noisy)), meta, self.bin_width, self.min_weight
            )
        else:
            pieces = [
                collect_variance_single(
                    n, meta, self.pseudo_sigma, self.bin_width, self.min_weight
                )
                for n in noisy
            ]
            samples = pieces[0]
            if len(pieces) > 1:
                samples = type(samples)(
                    np.concatenate([p.level for p in pieces]),
                    np.concatenate([p.variance for p in pieces]),
                    np.concatenate([p.weight for p in pieces]),
                )
        model = fit_gain(samples, meta.iso, robust=self.robust)
        self.model_ = model
        self.gain_ = model.gain
        self.var_intercept_ = model.var_intercept
        self.fit_r2_ = model.fit_r2
        self.fit_points_ = model.fit_points
        self.samples_ = samples
        return self

    def predict(self, levels) -> np.ndarray:
        """Predicted observation variance at the given signal levels."""
        if not hasattr(self, "model_"):
            raise NotFittedError("this SystemGainEstimator is not fitted; call fit first")
        return np.asarray(self.model_.predict_variance(np.asarray(levels, dtype=np.float64)))

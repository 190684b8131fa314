"""Signal-dependent noise: system-gain estimation and Poisson synthesis.

In DN units the photon-transfer relation is linear:
``Var(y) = g * level + Var(n_other)`` with ``level`` the black-subtracted
signal. The slope recovers the system gain g (DN per electron) from
either a single noisy image (pseudo-clean from a small blur, variance
pooled over 3x3 patches) or from clean/noisy pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import stats

from .errors import DegenerateFitError, InsufficientDataError, ShapeMismatchError
from .planar import FrameMeta, PlanarImage
from .rng import substream
from .synthesis import gaussian_blur

#: groups carrying fewer observations than this are too noisy to regress
MIN_GROUP_WEIGHT = 100

#: patches touching values this close to white_level are clipping-biased
CLIP_FRACTION = 0.98

DEFAULT_PSEUDO_SIGMA = 3.0


@dataclass(frozen=True)
class GainModel:
    """Fitted photon-transfer line for one ISO.

    ``gain`` is DN per electron; ``var_intercept`` is the
    signal-independent variance floor (clamped at 0); ``fit_r2`` always
    reports the quality of the unclamped fit.
    """

    iso: int
    gain: float
    var_intercept: float
    fit_points: int
    fit_r2: float

    def __post_init__(self) -> None:
        if not self.gain > 0:
            raise ValueError(f"gain must be > 0, got {self.gain}")
        if self.var_intercept < 0:
            raise ValueError(f"var_intercept must be >= 0, got {self.var_intercept}")

    def predict_variance(self, level: np.ndarray | float) -> np.ndarray | float:
        return self.gain * np.asarray(level) + self.var_intercept

    def to_json(self) -> str:
        return json.dumps(
            {
                "iso": self.iso,
                "gain": self.gain,
                "var_intercept": self.var_intercept,
                "fit_points": self.fit_points,
                "fit_r2": self.fit_r2,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "GainModel":
        raw = json.loads(text)
        return cls(
            iso=int(raw["iso"]),
            gain=float(raw["gain"]),
            var_intercept=float(raw["var_intercept"]),
            fit_points=int(raw["fit_points"]),
            fit_r2=float(raw["fit_r2"]),
        )


@dataclass(frozen=True)
class VarianceSamples:
    """Grouped (level, variance, weight) points feeding the gain fit.

    Levels are black-subtracted DN; weights are observation counts and
    every group carries at least the configured minimum.
    """

    level: np.ndarray
    variance: np.ndarray
    weight: np.ndarray

    def __post_init__(self) -> None:
        for name in ("level", "variance", "weight"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        if not (len(self.level) == len(self.variance) == len(self.weight)):
            raise ValueError("level/variance/weight lengths differ")
        if np.any(self.variance < 0):
            raise ValueError("variances must be >= 0")

    def __len__(self) -> int:
        return len(self.level)


def _group_stats(
    levels: np.ndarray,
    deviations: np.ndarray,
    bin_width: float,
    min_weight: int,
) -> VarianceSamples:
    """Pool deviations by quantized level; unbiased variance per group."""
    idx = np.floor(levels / bin_width).astype(np.int64)
    # compact group ids
    uniq, inverse = np.unique(idx, return_inverse=True)
    counts = np.bincount(inverse)
    sum_d = np.bincount(inverse, weights=deviations)
    sum_d2 = np.bincount(inverse, weights=deviations**2)
    sum_lvl = np.bincount(inverse, weights=levels)
    keep = counts >= max(min_weight, 2)
    if keep.sum() < 2:
        raise InsufficientDataError(
            f"only {int(keep.sum())} usable level groups after filtering, need >= 2"
        )
    n = counts[keep].astype(np.float64)
    mean_d = sum_d[keep] / n
    var = np.maximum((sum_d2[keep] - n * mean_d**2) / (n - 1), 0.0)
    return VarianceSamples(sum_lvl[keep] / n, var, n)


def collect_variance_single(
    noisy: PlanarImage,
    meta: FrameMeta,
    pseudo_sigma: float = DEFAULT_PSEUDO_SIGMA,
    bin_width: float | None = None,
    min_weight: int = MIN_GROUP_WEIGHT,
) -> VarianceSamples:
    """Variance-vs-level samples from one noisy image.

    A small Gaussian blur stands in for the clean image; every pixel of
    every interior 3x3 patch contributes its deviation from the
    pseudo-clean, grouped by the patch center's quantized pseudo-clean
    level. Patches are dropped when they touch near-white values
    (clipping bias), when their pseudo-clean spans more than one level
    bin (a patch straddling an edge does not share one mean value), or
    when they sit in the border margin where the blur is biased.
    """
    if bin_width is None:
        bin_width = (meta.white_level - meta.black_level) / 256.0
    if not bin_width > 0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    pseudo = gaussian_blur(noisy, pseudo_sigma)
    margin = int(np.ceil(4.0 * pseudo_sigma))
    clip_limit = CLIP_FRACTION * meta.white_level

    all_levels: list[np.ndarray] = []
    all_devs: list[np.ndarray] = []
    for c in range(noisy.channels):
        y = noisy.plane(c)
        pc = pseudo.plane(c)
        h, w = y.shape
        lo_h, hi_h = margin + 1, h - 1 - margin
        lo_w, hi_w = margin + 1, w - 1 - margin
        if hi_h <= lo_h or hi_w <= lo_w:
            raise InsufficientDataError(
                f"plane {h}x{w} too small for a 3x3 patch inside a {margin}px blur margin"
            )
        # windows[i, j] covers centers (lo_h + i, lo_w + j)
        y_win = sliding_window_view(y, (3, 3))[lo_h - 1 : hi_h - 1, lo_w - 1 : hi_w - 1]
        d_win = sliding_window_view(y - pc, (3, 3))[lo_h - 1 : hi_h - 1, lo_w - 1 : hi_w - 1]
        pc_win = sliding_window_view(pc, (3, 3))[lo_h - 1 : hi_h - 1, lo_w - 1 : hi_w - 1]
        centers = pc[lo_h:hi_h, lo_w:hi_w]
        unclipped = ~(y_win >= clip_limit).any(axis=(2, 3))
        flat = (pc_win.max(axis=(2, 3)) - pc_win.min(axis=(2, 3))) <= bin_width
        ok = unclipped & flat
        if not ok.any():
            continue
        levels = np.broadcast_to(centers[ok][:, None], (int(ok.sum()), 9)).ravel()
        devs = d_win[ok].reshape(-1)
        all_levels.append(levels - meta.black_level)
        all_devs.append(devs)
    if not all_levels:
        raise InsufficientDataError("every patch is clipped or level-straddling")
    return _group_stats(
        np.concatenate(all_levels), np.concatenate(all_devs), bin_width, min_weight
    )


def collect_variance_pairs(
    pairs: list[tuple[PlanarImage, PlanarImage]],
    meta: FrameMeta,
    bin_width: float | None = None,
    min_weight: int = MIN_GROUP_WEIGHT,
) -> VarianceSamples:
    """Variance-vs-level samples from (clean, noisy) pairs.

    Pixels from all pairs are pooled into shared buckets keyed by the
    clean value; the per-bucket variance of (noisy - clean) estimates
    Var(y) at that level. Clean values are assumed black-subtracted DN;
    near-white pixels in either frame are dropped.
    """
    if bin_width is None:
        bin_width = (meta.white_level - meta.black_level) / 256.0
    if not bin_width > 0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    # pair frames are black-subtracted, so translate the absolute threshold
    clip_limit = CLIP_FRACTION * meta.white_level - meta.black_level
    all_levels: list[np.ndarray] = []
    all_devs: list[np.ndarray] = []
    for clean, noisy in pairs:
        if clean.shape != noisy.shape:
            raise ShapeMismatchError(
                f"pair shapes differ: {clean.shape} vs {noisy.shape}"
            )
        lvl = clean.data.ravel()
        dev = (noisy.data - clean.data).ravel()
        ok = (lvl < clip_limit) & (noisy.data.ravel() < clip_limit)
        all_levels.append(lvl[ok])
        all_devs.append(dev[ok])
    levels = np.concatenate(all_levels)
    if levels.size == 0:
        raise InsufficientDataError("no unclipped pixels in any pair")
    return _group_stats(levels, np.concatenate(all_devs), bin_width, min_weight)


def fit_gain(
    samples: VarianceSamples,
    iso: int,
    robust: bool = False,
) -> GainModel:
    """Photon-transfer regression: variance against level.

    Weighted least squares with group counts as weights by default;
    ``robust=True`` switches to a Theil-Sen slope (weights ignored). A
    non-positive slope raises DegenerateFitError: it usually means a
    wrong black level or a saturated input.
    """
    if len(samples) < 2:
        raise InsufficientDataError(f"need >= 2 level groups, got {len(samples)}")
    x, y, w = samples.level, samples.variance, samples.weight
    if robust:
        slope, intercept, _, _ = stats.theilslopes(y, x)
    else:
        wsum = w.sum()
        xm = (w * x).sum() / wsum
        ym = (w * y).sum() / wsum
        sxx = (w * (x - xm) ** 2).sum()
        if sxx == 0:
            raise DegenerateFitError("all level groups coincide; cannot fit a slope")
        slope = (w * (x - xm) * (y - ym)).sum() / sxx
        intercept = ym - slope * xm
    if not slope > 0:
        raise DegenerateFitError(
            f"fitted gain {slope:.4g} is not positive; check black level and saturation"
        )
    resid = y - (slope * x + intercept)
    ss_res = (w * resid**2).sum()
    ym_w = (w * y).sum() / w.sum()
    ss_tot = (w * (y - ym_w) ** 2).sum()
    r2 = 1.0 if ss_tot == 0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return GainModel(
        iso=iso,
        gain=float(slope),
        var_intercept=float(max(intercept, 0.0)),
        fit_points=len(samples),
        fit_r2=float(r2),
    )


def sample_poisson_signal(
    clean: PlanarImage,
    g: float,
    ratio: float = 1.0,
    seed: int = 0,
) -> PlanarImage:
    """Photon shot noise for a clean signal at a given exposure ratio.

    ``clean`` is black-subtracted DN; each pixel's electron count
    ``clean / (g * ratio)`` is Poisson-sampled and scaled back by g,
    yielding the short-exposure observation in DN.
    """
    if not g > 0:
        raise ValueError(f"gain must be > 0, got {g}")
    if not ratio >= 1:
        raise ValueError(f"ratio must be >= 1, got {ratio}")
    if np.any(clean.data < 0):
        raise ValueError("clean input must be non-negative (black-subtracted DN)")
    rng = substream(seed, 0)
    electrons = clean.data / (g * ratio)
    return clean.with_data(g * rng.poisson(electrons).astype(np.float64))


def synthesize_noisy(
    clean: PlanarImage,
    gain: GainModel,
    synthetic_dark: PlanarImage,
    meta: FrameMeta,
    ratio: float = 1.0,
    quantize: bool = False,
    seed: int = 0,
) -> PlanarImage:
    """Full noisy observation: shot noise plus a synthetic dark frame.

    The dark frame enters black-subtracted, so output stays in
    black-subtracted DN; ``quantize`` rounds to integers and clips to
    the representable range.
    """
    if clean.shape != synthetic_dark.shape:
        raise ShapeMismatchError(
            f"clean shape {clean.shape} != dark shape {synthetic_dark.shape}"
        )
    shot = sample_poisson_signal(clean, gain.gain, ratio, seed)
    out = shot.data + (synthetic_dark.data - meta.black_level)
    if quantize:
        out = np.clip(np.rint(out), -meta.black_level, meta.white_level - meta.black_level)
    return clean.with_data(out)

"""Statistical realism metrics for synthesized noise.

Everything here compares a candidate noise field against a reference:
marginal distributions (histograms + KL divergence), inter-channel
correlation measured row-wise, the first four moments, and magnitude
spectra (global L2 plus radially averaged power curves).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ShapeMismatchError
from .planar import PlanarImage
from .synthesis import remove_fixed_pattern

#: probability floor added to every bin before KLD (avoids log(0))
KLD_EPSILON = 1e-10

DEFAULT_BINS = 256


@dataclass(frozen=True)
class Histogram:
    """Uniform-bin histogram with smoothed probabilities.

    ``counts`` holds every input sample (out-of-range values land in the
    edge bins); ``probabilities`` are epsilon-smoothed and renormalized.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    probabilities: np.ndarray

    @property
    def bins(self) -> int:
        return len(self.counts)


def histogram(
    values: np.ndarray | PlanarImage,
    bins: int = DEFAULT_BINS,
    value_range: tuple[float, float] | None = None,
) -> Histogram:
    """Bin ``values`` uniformly over ``value_range``.

    The range defaults to the sample min/max (widened by 0.5 on each
    side when all samples coincide). Samples outside the range are
    counted into the nearest edge bin rather than dropped.
    """
    if isinstance(values, PlanarImage):
        values = values.data
    flat = np.asarray(values, dtype=np.float64).ravel()
    if bins < 2:
        raise ValueError(f"need at least 2 bins, got {bins}")
    if flat.size == 0:
        raise ValueError("cannot histogram an empty sample")
    if value_range is None:
        lo, hi = float(flat.min()), float(flat.max())
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
    else:
        lo, hi = float(value_range[0]), float(value_range[1])
    if not lo < hi:
        raise ValueError(f"range min must be < max, got ({lo}, {hi})")
    edges = np.linspace(lo, hi, bins + 1)
    idx = np.clip(((flat - lo) * (bins / (hi - lo))).astype(np.int64), 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    probs = counts / flat.size + KLD_EPSILON
    probs /= probs.sum()
    return Histogram(edges, counts, probs)


def kld(p: Histogram, q: Histogram) -> float:
    """Kullback-Leibler divergence D(p || q) over smoothed probabilities."""
    if p.bins != q.bins or not np.array_equal(p.bin_edges, q.bin_edges):
        raise ValueError("histograms must share identical binning")
    return float(np.sum(p.probabilities * np.log(p.probabilities / q.probabilities)))


@dataclass(frozen=True)
class CorrelationMatrix:
    """C x C Pearson matrix, symmetric with unit diagonal."""

    values: np.ndarray
    rows_used: int

    def offdiagonal_mean(self) -> float:
        c = self.values.shape[0]
        mask = ~np.eye(c, dtype=bool)
        return float(self.values[mask].mean())


def icc_matrix(img: PlanarImage) -> CorrelationMatrix:
    """Inter-channel correlation, measured row-wise and averaged.

    For every image row, the C channel slices of length W are correlated
    pairwise; the matrices are averaged over all rows where every
    channel shows variation. Rows with any flat channel are skipped.
    """
    if img.channels < 2:
        raise ValueError(f"need at least 2 channels, got {img.channels}")
    x = img.data
    centered = x - x.mean(axis=2, keepdims=True)
    power = np.einsum("chw,chw->ch", centered, centered)
    valid = (power > 0).all(axis=0)
    if not valid.any():
        raise DegenerateInputError("every row has at least one constant channel")
    cov = np.einsum("ahw,bhw->hab", centered, centered)
    denom = np.sqrt(power.T[:, :, None] * power.T[:, None, :])
    corr = cov[valid] / denom[valid]
    mean = corr.mean(axis=0)
    mean = (mean + mean.T) / 2.0
    np.fill_diagonal(mean, 1.0)
    return CorrelationMatrix(np.clip(mean, -1.0, 1.0), int(valid.sum()))


@dataclass(frozen=True)
class Moments:
    """Per-channel mean, unbiased variance, skewness, kurtosis (non-excess).

    Skewness and kurtosis are standardized central moments; a constant
    channel reports 0 for both by convention. A Gaussian channel has
    kurtosis 3.
    """

    mean: np.ndarray
    variance: np.ndarray
    skewness: np.ndarray
    kurtosis: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.stack([self.mean, self.variance, self.skewness, self.kurtosis], axis=1)


def moments(img: PlanarImage) -> Moments:
    x = img.data.reshape(img.channels, -1)
    n = x.shape[1]
    mean = x.mean(axis=1)
    centered = x - mean[:, None]
    m2 = (centered**2).mean(axis=1)
    variance = (centered**2).sum(axis=1) / (n - 1) if n > 1 else np.zeros_like(mean)
    with np.errstate(divide="ignore", invalid="ignore"):
        skew = np.where(m2 > 0, (centered**3).mean(axis=1) / m2**1.5, 0.0)
        kurt = np.where(m2 > 0, (centered**4).mean(axis=1) / m2**2, 0.0)
    return Moments(mean, variance, skew, kurt)


@dataclass(frozen=True)
class SpectralDistance:
    """L2 gap between unit-energy magnitude spectra, plus radial PSD curves."""

    l2: float
    per_channel: np.ndarray
    psd_reference: np.ndarray
    psd_candidate: np.ndarray


def _radial_psd(spectra: np.ndarray) -> np.ndarray:
    """Channel-averaged power in integer-radius annuli around DC."""
    c, h, w = spectra.shape
    fu = np.minimum(np.arange(h), h - np.arange(h))[:, None]
    fv = np.minimum(np.arange(w), w - np.arange(w))[None, :]
    radius = np.rint(np.hypot(fu, fv)).astype(np.int64).ravel()
    power = (np.abs(spectra) ** 2).reshape(c, -1).mean(axis=0)
    sums = np.bincount(radius, weights=power)
    counts = np.bincount(radius)
    return sums / counts


def spectral_distance(ref: PlanarImage, cand: PlanarImage) -> SpectralDistance:
    """Compare magnitude spectra, ignoring total energy and phase.

    Each channel's magnitude spectrum is normalized to unit L2 norm
    before differencing, so the distance responds to the *shape* of the
    frequency content; a pure phase randomization of ``ref`` scores 0.
    """
    if ref.shape != cand.shape:
        raise ShapeMismatchError(f"ref shape {ref.shape} != cand shape {cand.shape}")
    spec_r = np.fft.fft2(ref.data, axes=(-2, -1))
    spec_c = np.fft.fft2(cand.data, axes=(-2, -1))
    mag_r = np.abs(spec_r).reshape(ref.channels, -1)
    mag_c = np.abs(spec_c).reshape(ref.channels, -1)
    norm_r = np.linalg.norm(mag_r, axis=1, keepdims=True)
    norm_c = np.linalg.norm(mag_c, axis=1, keepdims=True)
    unit_r = np.divide(mag_r, norm_r, out=np.zeros_like(mag_r), where=norm_r > 0)
    unit_c = np.divide(mag_c, norm_c, out=np.zeros_like(mag_c), where=norm_c > 0)
    per_channel = np.linalg.norm(unit_r - unit_c, axis=1)
    return SpectralDistance(
        l2=float(per_channel.mean()),
        per_channel=per_channel,
        psd_reference=_radial_psd(spec_r),
        psd_candidate=_radial_psd(spec_c),
    )


@dataclass(frozen=True)
class ValidationReport:
    """Bundle of realism metrics between two dark frames' residuals.

    ICC fields are None when the input has a single channel (marked
    not-computed in the JSON output).
    """

    sigma: float
    bins: int
    channel_labels: tuple[str, ...]
    kld_per_channel: np.ndarray
    mean_delta: np.ndarray
    variance_delta: np.ndarray
    skewness_delta: np.ndarray
    kurtosis_delta: np.ndarray
    icc_offdiag_reference: float | None
    icc_offdiag_candidate: float | None
    icc_offdiag_delta: float | None
    spectral_l2: float
    psd_reference: np.ndarray
    psd_candidate: np.ndarray

    def to_dict(self) -> dict:
        def listify(x):
            return np.asarray(x, dtype=np.float64).tolist()

        return {
            "sigma": self.sigma,
            "bins": self.bins,
            "channel_labels": list(self.channel_labels),
            "kld_per_channel": listify(self.kld_per_channel),
            "mean_delta": listify(self.mean_delta),
            "variance_delta": listify(self.variance_delta),
            "skewness_delta": listify(self.skewness_delta),
            "kurtosis_delta": listify(self.kurtosis_delta),
            "icc_offdiag_reference": self.icc_offdiag_reference,
            "icc_offdiag_candidate": self.icc_offdiag_candidate,
            "icc_offdiag_delta": self.icc_offdiag_delta,
            "spectral_l2": self.spectral_l2,
            "psd_reference": listify(self.psd_reference),
            "psd_candidate": listify(self.psd_candidate),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def validate_report(
    ref_dark: PlanarImage,
    syn_dark: PlanarImage,
    sigma: float,
    bins: int = DEFAULT_BINS,
) -> ValidationReport:
    """Decompose both frames and compare their stochastic residuals.

    Histograms use ``bins`` uniform bins over the reference residual's
    per-channel [min, max]; KLD is D(candidate || reference). Moment
    deltas are candidate minus reference.
    """
    dec_ref = remove_fixed_pattern(ref_dark, sigma)
    dec_syn = remove_fixed_pattern(syn_dark, sigma)
    res_ref = dec_ref.residual
    res_syn = dec_syn.residual
    if res_ref.shape != res_syn.shape:
        raise ShapeMismatchError(f"shapes differ: {res_ref.shape} vs {res_syn.shape}")

    klds = np.empty(res_ref.channels)
    for c in range(res_ref.channels):
        plane = res_ref.plane(c)
        rng = (float(plane.min()), float(plane.max()))
        h_ref = histogram(plane, bins, rng)
        h_syn = histogram(res_syn.plane(c), bins, rng)
        klds[c] = kld(h_syn, h_ref)

    m_ref = moments(res_ref)
    m_syn = moments(res_syn)

    if res_ref.channels >= 2:
        icc_ref = icc_matrix(res_ref).offdiagonal_mean()
        icc_syn = icc_matrix(res_syn).offdiagonal_mean()
        icc_delta = icc_syn - icc_ref
    else:
        icc_ref = icc_syn = icc_delta = None

    sd = spectral_distance(res_ref, res_syn)
    return ValidationReport(
        sigma=float(sigma),
        bins=int(bins),
        channel_labels=ref_dark.channel_labels,
        kld_per_channel=klds,
        mean_delta=m_syn.mean - m_ref.mean,
        variance_delta=m_syn.variance - m_ref.variance,
        skewness_delta=m_syn.skewness - m_ref.skewness,
        kurtosis_delta=m_syn.kurtosis - m_ref.kurtosis,
        icc_offdiag_reference=icc_ref,
        icc_offdiag_candidate=icc_syn,
        icc_offdiag_delta=icc_delta,
        spectral_l2=sd.l2,
        psd_reference=sd.psd_reference,
        psd_candidate=sd.psd_candidate,
    )

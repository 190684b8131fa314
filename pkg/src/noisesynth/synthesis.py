"""Dark-frame synthesis by spectral sampling with iterative refinement.

Given one reference dark frame, the pipeline:

1. splits it into a smooth fixed pattern S (large-kernel Gaussian blur),
   per-channel means, and a zero-mean stochastic residual R;
2. draws a new residual by keeping R's Fourier magnitudes and adding a
   random conjugate-antisymmetric phase offset, shared across channels
   so inter-channel correlations survive;
3. alternates exact histogram matching against R with re-imposition of
   R's magnitude spectrum, K times;
4. adds S and the channel means back.

Every draw is deterministic given (reference frame, seed, draw index)
and preserves R's magnitude spectrum bin for bin.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ShapeMismatchError
from .planar import FrameMeta, PlanarImage
from .rng import substream
from .spectral import _fft2, _inverse_real, antisymmetrize_phase

#: below this blur scale the truncated kernel is indistinguishable from a delta
IDENTITY_SIGMA = 0.3


@dataclass(frozen=True)
class SynthesisConfig:
    """Knobs for one synthesis run.

    ``shared_phase=False`` draws an independent phase offset per channel
    (breaks inter-channel correlation); ``histogram_matching=False``
    skips the refinement loop. Both exist for ablation studies.
    """

    sigma: float = 50.0
    iterations: int = 10
    seed: int = 0
    shared_phase: bool = True
    histogram_matching: bool = True

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")


@dataclass(frozen=True)
class Decomposition:
    """Additive split of a dark frame: frame == fixed_pattern + residual + means."""

    fixed_pattern: PlanarImage
    residual: PlanarImage
    means: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.fixed_pattern.data + self.residual.data + self.means[:, None, None]


@dataclass(frozen=True)
class SynthesisDiagnostics:
    """Numerical health of one draw: worst imaginary residue discarded."""

    max_imag_residue: float


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(np.ceil(4.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(img: PlanarImage, sigma: float) -> PlanarImage:
    """Separable Gaussian blur with mirror boundaries.

    The 1D kernel is truncated at radius ceil(4*sigma) and renormalized
    to unit sum; boundaries reflect without repeating the edge sample.
    Sigma below ``IDENTITY_SIGMA`` degenerates to the identity.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if sigma < IDENTITY_SIGMA:
        return img
    return img.with_data(_blur_array(img.data, sigma))


def _blur_array(data: np.ndarray, sigma: float) -> np.ndarray:
    kernel = _gaussian_kernel(sigma)
    out = ndimage.correlate1d(data, kernel, axis=-1, mode="mirror")
    return ndimage.correlate1d(out, kernel, axis=-2, mode="mirror")


def remove_fixed_pattern(dark: PlanarImage, sigma: float) -> Decomposition:
    """Estimate and strip the smooth fixed pattern of a dark frame.

    S is the blurred frame, the residual is the centered remainder:
    ``S + residual + means`` reconstructs the input exactly.
    """
    if not sigma > 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if sigma < IDENTITY_SIGMA:
        warnings.warn(
            f"sigma={sigma} degenerates to an identity blur: the residual is zero "
            "and synthesis from it is vacuous",
            RuntimeWarning,
            stacklevel=2,
        )
    smooth = gaussian_blur(dark, sigma)
    rough = dark.data - smooth.data
    means = rough.mean(axis=(1, 2))
    residual = rough - means[:, None, None]
    return Decomposition(smooth, dark.with_data(residual), means)


def export_dark_shading(dark: PlanarImage, sigma: float) -> PlanarImage:
    """Per-ISO dark shading map: the fixed pattern plus channel offsets.

    This is what gets subtracted from noisy inputs in dark-shading
    corrected pipelines.
    """
    decomp = remove_fixed_pattern(dark, sigma)
    return dark.with_data(decomp.fixed_pattern.data + decomp.means[:, None, None])


def histogram_match(src: PlanarImage, ref: PlanarImage) -> PlanarImage:
    """Exact rank matching of ``src`` onto ``ref``, per channel.

    The k-th smallest ref value lands where the k-th smallest src value
    was (ties broken by flat index, so matching a frame onto itself is a
    bit-exact no-op). The output's per-channel value multiset equals
    ref's exactly.
    """
    if src.shape != ref.shape:
        raise ShapeMismatchError(f"src shape {src.shape} != ref shape {ref.shape}")
    return src.with_data(_match_sorted(src.data, np.sort(ref.data.reshape(ref.channels, -1), axis=1)))


def _stable_order(values: np.ndarray) -> np.ndarray:
    """Ranking by (value, flat index).

    Quicksort and the stable sort agree whenever all values are
    distinct (the permutation is unique), so the slower stable sort
    only runs when ties are actually present.
    """
    order = np.argsort(values, kind="quicksort")
    ranked = values[order]
    if np.any(ranked[1:] == ranked[:-1]):
        return np.argsort(values, kind="stable")
    return order


def _match_sorted(src: np.ndarray, sorted_ref: np.ndarray) -> np.ndarray:
    c, h, w = src.shape
    flat = src.reshape(c, -1)
    out = np.empty_like(flat)
    for ch in range(c):
        out[ch, _stable_order(flat[ch])] = sorted_ref[ch]
    return out.reshape(c, h, w)


def _refine_array(
    noise: np.ndarray,
    ref_magnitude: np.ndarray,
    sorted_ref: np.ndarray,
    iterations: int,
) -> tuple[np.ndarray, float]:
    """Histogram-matching / spectral-correction passes on raw arrays."""
    worst = 0.0
    unit = np.empty(ref_magnitude.shape, dtype=np.complex128)
    strength = np.empty(ref_magnitude.shape)
    for _ in range(iterations):
        matched = _match_sorted(noise, sorted_ref)
        mu = matched.mean(axis=(1, 2))
        centered = matched - mu[:, None, None]
        spectrum = _fft2(centered)
        np.abs(spectrum, out=strength)
        unit.fill(1.0)
        np.divide(spectrum, strength, out=unit, where=strength > 0)
        unit *= ref_magnitude
        corrected, residue = _inverse_real(unit, 1.0)
        worst = max(worst, residue)
        noise = corrected + mu[:, None, None]
    return noise, worst


class _Sampler:
    """Reference state shared by every draw from one dark frame.

    Holds the decomposition, the residual's spectrum, and the sorted
    per-channel reference values, so batch generation pays the blur and
    reference FFT once.
    """

    def __init__(self, dark: PlanarImage, config: SynthesisConfig):
        self.config = config
        self.decomposition = remove_fixed_pattern(dark, config.sigma)
        residual = self.decomposition.residual.data
        self.ref_spectrum = _fft2(residual)
        self.ref_magnitude = np.abs(self.ref_spectrum)
        self.sorted_ref = np.sort(residual.reshape(residual.shape[0], -1), axis=1)
        self.labels = dark.channel_labels

    def draw_residual(self, draw_index: int) -> tuple[np.ndarray, float]:
        """One synthetic residual plus the worst imaginary residue seen."""
        cfg = self.config
        c, h, w = self.ref_spectrum.shape
        rng = substream(cfg.seed, draw_index)
        if cfg.shared_phase:
            xi = antisymmetrize_phase(rng.uniform(-np.pi, np.pi, size=(h, w))).values
            rotation = np.exp(1j * xi)[None, :, :]
        else:
            xi = np.stack(
                [
                    antisymmetrize_phase(rng.uniform(-np.pi, np.pi, size=(h, w))).values
                    for _ in range(c)
                ]
            )
            rotation = np.exp(1j * xi)
        randomized = self.ref_spectrum * rotation
        noise, residue = _inverse_real(randomized, 1.0)
        worst = residue
        if cfg.histogram_matching:
            noise, worst_refine = _refine_array(
                noise, self.ref_magnitude, self.sorted_ref, cfg.iterations
            )
            worst = max(worst, worst_refine)
        return noise, worst

    def draw_frame(self, draw_index: int) -> tuple[PlanarImage, SynthesisDiagnostics]:
        noise, worst = self.draw_residual(draw_index)
        frame = (
            noise
            + self.decomposition.fixed_pattern.data
            + self.decomposition.means[:, None, None]
        )
        return PlanarImage(frame, self.labels), SynthesisDiagnostics(worst)


def phase_randomize(
    decomp: Decomposition,
    config: SynthesisConfig,
    rng: np.random.Generator,
    xi: np.ndarray | None = None,
) -> PlanarImage:
    """Initial synthetic residual: reference magnitudes, randomized phase.

    A single uniform(-pi, pi] offset field is drawn, projected onto the
    conjugate-antisymmetric set (so the inverse transform is real), and
    added to every channel's phase; with ``shared_phase=False`` each
    channel gets its own field. ``xi`` injects a raw offset field (or a
    per-channel stack) in place of the random draw, for tests.
    """
    residual = decomp.residual.data
    c, h, w = residual.shape
    if xi is None:
        count = 1 if config.shared_phase else c
        xi = np.stack([rng.uniform(-np.pi, np.pi, size=(h, w)) for _ in range(count)])
    else:
        xi = np.asarray(xi, dtype=np.float64)
        if xi.ndim == 2:
            xi = xi[None, :, :]
    fields = np.stack([antisymmetrize_phase(layer).values for layer in xi])
    if fields.shape[0] != 1 and fields.shape[0] != c:
        raise ShapeMismatchError(f"{fields.shape[0]} phase fields for {c} channels")
    rotation = np.exp(1j * fields)
    noise, _ = _inverse_real(_fft2(residual) * rotation, 1.0)
    return decomp.residual.with_data(noise)


def refine(noise: PlanarImage, decomp: Decomposition, iterations: int) -> PlanarImage:
    """Alternate exact histogram matching with spectral correction.

    Each pass matches the working residual's values onto the reference
    residual's (restoring the marginal distribution exactly), recenters,
    then swaps in the reference magnitude spectrum while keeping the
    matched phases (restoring frequency content). ``iterations=0``
    returns the input unchanged.
    """
    if iterations < 0:
        raise ValueError(f"iterations must be >= 0, got {iterations}")
    if noise.shape != decomp.residual.shape:
        raise ShapeMismatchError(
            f"noise shape {noise.shape} != residual shape {decomp.residual.shape}"
        )
    if iterations == 0:
        return noise
    residual = decomp.residual.data
    ref_magnitude = np.abs(_fft2(residual))
    sorted_ref = np.sort(residual.reshape(residual.shape[0], -1), axis=1)
    refined, _ = _refine_array(noise.data, ref_magnitude, sorted_ref, iterations)
    return noise.with_data(refined)


def synthesize_dark(
    dark: PlanarImage,
    meta: FrameMeta,
    config: SynthesisConfig,
    draw_index: int = 0,
    return_diagnostics: bool = False,
):
    """Synthesize one dark frame that mimics the reference's noise.

    Deterministic given (dark, config.seed, draw_index); ``meta`` rides
    along so callers can serialize the result against the same ISO.
    """
    frame, diag = _Sampler(dark, config).draw_frame(draw_index)
    if return_diagnostics:
        return frame, diag
    return frame


def synthesize_dark_batch(
    dark: PlanarImage,
    meta: FrameMeta,
    config: SynthesisConfig,
    count: int,
    start_index: int = 0,
    return_diagnostics: bool = False,
):
    """``count`` independent draws, sharing one reference decomposition.

    Frame i uses substream (seed, start_index + i), so a batch equals
    the concatenation of individual :func:`synthesize_dark` calls.
    """
    sampler = _Sampler(dark, config)
    frames: list[PlanarImage] = []
    diagnostics: list[SynthesisDiagnostics] = []
    for i in range(count):
        frame, diag = sampler.draw_frame(start_index + i)
        frames.append(frame)
        diagnostics.append(diag)
    if return_diagnostics:
        return frames, diagnostics
    return frames

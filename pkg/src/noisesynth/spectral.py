"""Per-channel 2D Fourier analysis/synthesis.

Conventions: the forward transform is the unnormalized DFT
(``X(u,v) = sum x(h,w) exp(-2*pi*i*(uh/H + vw/W))``, as in
:func:`numpy.fft.fft2`); the plain inverse carries the 1/(H*W) factor so
``inverse_dft(forward_dft(x)) == x``. :func:`inverse_dft_normalized`
additionally divides by sqrt(H*W), i.e. it reconstructs ``x/sqrt(H*W)``
from ``forward_dft(x)``.

Both inverses realize a spectrum as a real image: the imaginary residue
is reported, and a residue far above rounding level raises
:class:`~noisesynth.errors.SymmetryViolationError` because it signals a
non-Hermitian spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as _fft

from .errors import SymmetryViolationError
from .planar import PlanarImage

#: fraction of the worst-case single-bin leakage tolerated as rounding noise
_RESIDUE_RTOL = 1e-6

#: brute-force oracle refuses planes larger than this (O((HW)^2) cost)
ORACLE_MAX_PIXELS = 4096


@dataclass(frozen=True)
class SpectrumStack:
    """Immutable C x H x W complex spectrum, same layout as PlanarImage."""

    data: np.ndarray
    channel_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.complex128, copy=True)
        if arr.ndim != 3:
            raise ValueError(f"expected (C, H, W) data, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("spectrum contains NaN or Inf")
        labels = tuple(self.channel_labels) if self.channel_labels else tuple(
            f"c{i}" for i in range(arr.shape[0])
        )
        if len(labels) != arr.shape[0]:
            raise ValueError(f"{len(labels)} channel labels for {arr.shape[0]} channels")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "channel_labels", labels)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class PhaseField:
    """H x W phase offsets in (-pi, pi].

    With ``conjugate_antisymmetric`` set, the field satisfies
    ``field[-u % H, -v % W] == -field[u, v]`` and vanishes at every
    self-conjugate bin, so ``exp(i*field)`` multiplies a Hermitian
    spectrum into another Hermitian spectrum (real inverse).
    """

    values: np.ndarray
    conjugate_antisymmetric: bool = False

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise ValueError(f"expected (H, W) phase values, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("phase field contains NaN or Inf")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


def forward_dft(img: PlanarImage) -> SpectrumStack:
    """Unnormalized 2D DFT of each channel."""
    return SpectrumStack(_fft.fft2(img.data, axes=(-2, -1)), img.channel_labels)


def _fft2(data: np.ndarray) -> np.ndarray:
    """Forward transform shared by the whole package (per-channel 2D)."""
    return _fft.fft2(data, axes=(-2, -1))


def _inverse_real(spec: np.ndarray, scale: float) -> tuple[np.ndarray, float]:
    """``scale * ifft2(spec)`` as a real array plus its imaginary residue.

    Raises SymmetryViolationError when the residue exceeds rounding
    level for the spectrum's magnitude (a genuinely asymmetric bin).
    """
    h, w = spec.shape[-2:]
    raw = _fft.ifft2(spec, axes=(-2, -1))
    if scale != 1.0:
        raw *= scale
    residue = float(np.max(np.abs(raw.imag))) if raw.size else 0.0
    # a single fully asymmetric bin of magnitude M leaks ~ scale*M/(H*W)
    limit = _RESIDUE_RTOL * float(np.max(np.abs(spec), initial=0.0)) * scale / np.sqrt(h * w)
    if residue > limit:
        raise SymmetryViolationError(
            f"imaginary residue {residue:.3e} exceeds {limit:.3e}: spectrum is not Hermitian"
        )
    return raw.real, residue


def inverse_dft(spec: SpectrumStack) -> tuple[PlanarImage, float]:
    """Standard inverse DFT (1/(H*W) factor), realized as a real image.

    Returns the image and the discarded imaginary residue (max-abs).
    """
    real, residue = _inverse_real(spec.data, 1.0)
    return PlanarImage(real, spec.channel_labels), residue


def inverse_dft_normalized(spec: SpectrumStack) -> tuple[PlanarImage, float]:
    """Inverse DFT with an extra 1/sqrt(H*W) on top of the 1/(H*W) factor.

    ``inverse_dft_normalized(forward_dft(x))`` equals ``x/sqrt(H*W)``.
    Returns the image and the discarded imaginary residue (max-abs).
    """
    h, w = spec.height, spec.width
    real, residue = _inverse_real(spec.data, 1.0 / np.sqrt(h * w))
    return PlanarImage(real, spec.channel_labels), residue


def magnitude(spec: SpectrumStack) -> PlanarImage:
    """Pointwise modulus |X|."""
    return PlanarImage(np.abs(spec.data), spec.channel_labels)


def phase(spec: SpectrumStack) -> PlanarImage:
    """Pointwise argument in (-pi, pi], with phase(0) defined as 0."""
    ang = np.angle(spec.data)
    # np.angle can emit -pi for negative reals with a -0.0 imaginary part
    ang[ang == -np.pi] = np.pi
    return PlanarImage(ang, spec.channel_labels)


def antisymmetrize_phase(raw: np.ndarray) -> PhaseField:
    """Project raw H x W phase offsets onto the conjugate-antisymmetric set.

    For each conjugate pair {(u, v), (-u, -v)} the value at the
    lexicographically smaller index is kept and its partner negated;
    self-conjugate bins (DC, and Nyquist rows/columns for even H or W)
    are zeroed. Applying the result via ``exp(i*field)`` preserves the
    realness of any inverse transform.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        raise ValueError(f"expected (H, W) phase values, got shape {raw.shape}")
    h, w = raw.shape
    u = np.arange(h)[:, None]
    v = np.arange(w)[None, :]
    pu = (-u) % h
    pv = (-v) % w
    is_self = (pu == u) & (pv == v)
    keep = (u < pu) | ((u == pu) & (v < pv))
    out = np.where(keep, raw, -raw[pu, pv])
    out[is_self] = 0.0
    return PhaseField(out, conjugate_antisymmetric=True)


def dft_oracle(img: PlanarImage) -> SpectrumStack:
    """Brute-force DFT by direct evaluation of the definition.

    Test reference for :func:`forward_dft`; rejects planes with more
    than ``ORACLE_MAX_PIXELS`` pixels.
    """
    h, w = img.height, img.width
    if h * w > ORACLE_MAX_PIXELS:
        raise ValueError(f"oracle limited to {ORACLE_MAX_PIXELS} pixels, got {h * w}")
    out = np.zeros((img.channels, h, w), dtype=np.complex128)
    hh = np.arange(h)
    ww = np.arange(w)
    for u in range(h):
        for v in range(w):
            kernel = np.exp(-2j * np.pi * (u * hh[:, None] / h + v * ww[None, :] / w))
            out[:, u, v] = (img.data * kernel[None, :, :]).sum(axis=(1, 2))
    return SpectrumStack(out, img.channel_labels)

"""Synthetic sensor with fully known noise components.

Stands in for a real camera at desk scale: every frame's fixed pattern,
banding strength, read-noise law, and system gain are known exactly, so
downstream estimators can be tested against ground truth instead of
against other estimates.

Component streams are seeded independently, so switching one component
off leaves the others' draws untouched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np
from scipy import stats

from .planar import FrameMeta, PlanarImage
from .rng import substream
from .synthesis import _blur_array

_READ_FAMILIES = ("gaussian", "tukey_lambda")

# substream coordinates per component (keep frozen: they define the bits)
_FPN, _BAND, _READ, _HOT, _SCENE, _SHOT = range(6)

_SHORT_KEYS = {"c": "channels", "h": "height", "w": "width"}


@dataclass(frozen=True)
class SimConfig:
    """Everything the synthetic sensor needs, JSON-serializable.

    ``sigma_read`` scales the per-pixel read noise (its true standard
    deviation, for either family); ``sigma_band`` is the per-column
    banding offset's standard deviation, shared identically across
    channels. FPN is blurred white noise with RMS ``fpn_amplitude`` and
    correlation length ``fpn_scale`` pixels.
    """

    channels: int = 4
    height: int = 256
    width: int = 512
    iso: int = 1600
    black_level: float = 512.0
    white_level: float = 16383.0
    g_true: float = 1.8
    read_family: str = "gaussian"
    tukey_shape: float = -0.1
    sigma_read: float = 6.0
    sigma_band: float = 0.0
    fpn_amplitude: float = 0.0
    fpn_scale: float = 100.0
    hot_pixel_rate: float = 0.0
    hot_pixel_amplitude: float = 0.0
    apply_shot_noise: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.channels, self.height, self.width) < 1:
            raise ValueError("channels/height/width must be >= 1")
        for name in ("sigma_read", "sigma_band", "fpn_amplitude", "hot_pixel_amplitude"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0 <= self.hot_pixel_rate <= 1:
            raise ValueError(f"hot_pixel_rate must be in [0, 1], got {self.hot_pixel_rate}")
        if not self.g_true > 0:
            raise ValueError(f"g_true must be > 0, got {self.g_true}")
        if self.read_family not in _READ_FAMILIES:
            raise ValueError(f"read_family must be one of {_READ_FAMILIES}")
        if self.read_family == "tukey_lambda" and self.tukey_shape <= -0.5:
            raise ValueError("tukey_shape must be > -0.5 for a finite read-noise variance")
        if not 0 <= self.black_level < self.white_level:
            raise ValueError("need 0 <= black_level < white_level")

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        fixed = {_SHORT_KEYS.get(k, k): v for k, v in raw.items()}
        known = set(cls.__dataclass_fields__)
        unknown = set(fixed) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**fixed)

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def meta(self) -> FrameMeta:
        return FrameMeta(
            iso=self.iso,
            black_level=self.black_level,
            white_level=self.white_level,
            sensor_id="sim",
            exposure_tag="normal",
        )


@dataclass(frozen=True)
class GroundTruth:
    """What the simulator actually put into a frame.

    ``icc_offdiag`` is the analytic row-wise inter-channel correlation
    of the stochastic residual, band_var / (band_var + read_var).
    """

    fpn: np.ndarray
    mean_offset: float
    icc_offdiag: float
    gain: float

    def summary(self) -> dict:
        return {
            "mean_offset": self.mean_offset,
            "icc_offdiag": self.icc_offdiag,
            "gain": self.gain,
            "fpn_rms": float(np.sqrt((self.fpn**2).mean())),
        }


def _analytic_icc(cfg: SimConfig) -> float:
    denom = cfg.sigma_band**2 + cfg.sigma_read**2
    return 0.0 if denom == 0 else cfg.sigma_band**2 / denom


def _fpn_field(cfg: SimConfig, seed: int) -> np.ndarray:
    if cfg.fpn_amplitude == 0:
        return np.zeros((cfg.channels, cfg.height, cfg.width))
    rng = substream(seed, _FPN)
    white = rng.standard_normal((cfg.channels, cfg.height, cfg.width))
    smooth = _blur_array(white, cfg.fpn_scale)
    smooth -= smooth.mean(axis=(1, 2), keepdims=True)
    rms = np.sqrt((smooth**2).mean(axis=(1, 2), keepdims=True))
    return cfg.fpn_amplitude * smooth / rms


def _read_noise(cfg: SimConfig, seed: int) -> np.ndarray:
    if cfg.sigma_read == 0:
        return np.zeros((cfg.channels, cfg.height, cfg.width))
    rng = substream(seed, _READ)
    shape = (cfg.channels, cfg.height, cfg.width)
    if cfg.read_family == "gaussian":
        return rng.normal(0.0, cfg.sigma_read, size=shape)
    u = rng.random(shape)
    draws = stats.tukeylambda.ppf(u, cfg.tukey_shape)
    return draws * (cfg.sigma_read / stats.tukeylambda.std(cfg.tukey_shape))


def generate_dark(
    cfg: SimConfig, seed: int | None = None
) -> tuple[PlanarImage, FrameMeta, GroundTruth]:
    """One dark frame: black level + FPN + banding + read noise + hot pixels.

    Banding is a per-column offset, constant down each column and
    identical in every channel, which is what makes the row-wise
    inter-channel correlation land on the analytic target.
    """
    if seed is None:
        seed = cfg.seed
    fpn = _fpn_field(cfg, seed)
    frame = cfg.black_level + fpn + _read_noise(cfg, seed)
    if cfg.sigma_band > 0:
        band = substream(seed, _BAND).normal(0.0, cfg.sigma_band, size=cfg.width)
        frame = frame + band[None, None, :]
    if cfg.hot_pixel_rate > 0 and cfg.hot_pixel_amplitude > 0:
        mask = substream(seed, _HOT).random(frame.shape) < cfg.hot_pixel_rate
        frame = frame + cfg.hot_pixel_amplitude * mask
    truth = GroundTruth(
        fpn=fpn,
        mean_offset=cfg.black_level,
        icc_offdiag=_analytic_icc(cfg),
        gain=cfg.g_true,
    )
    return PlanarImage(frame), cfg.meta(), truth


#: flat-patch levels as fractions of the scene's full span
_PATCH_FRACTIONS = (0.10, 0.25, 0.40, 0.55, 0.70, 0.85)
_PATCH_SIZE = 64


def generate_scene(cfg: SimConfig, seed: int | None = None) -> PlanarImage:
    """Smooth non-negative radiance field with flat calibration patches.

    Spans [0, 0.8*(white - black)] in black-subtracted DN and stamps at
    least five 64x64 constant patches at distinct levels, so variance
    grouping always has well-populated bins.
    """
    if seed is None:
        seed = cfg.seed
    cells_h = cfg.height // _PATCH_SIZE
    cells_w = cfg.width // _PATCH_SIZE
    if cells_h * cells_w < 5:
        raise ValueError(
            f"scene {cfg.height}x{cfg.width} too small for 5 patches of {_PATCH_SIZE}px"
        )
    span = 0.8 * (cfg.white_level - cfg.black_level)
    rng = substream(seed, _SCENE)
    base = _blur_array(rng.standard_normal((1, cfg.height, cfg.width)), 32.0)[0]
    lo, hi = base.min(), base.max()
    field = span * (base - lo) / (hi - lo) if hi > lo else np.full_like(base, 0.5 * span)

    cells = [(r, c) for r in range(cells_h) for c in range(cells_w)]
    stride = max(1, len(cells) // len(_PATCH_FRACTIONS))
    for k, frac in enumerate(_PATCH_FRACTIONS):
        r, c = cells[(k * stride) % len(cells)]
        h0, w0 = r * _PATCH_SIZE, c * _PATCH_SIZE
        field[h0 : h0 + _PATCH_SIZE, w0 : w0 + _PATCH_SIZE] = frac * span
    return PlanarImage(np.broadcast_to(field, (cfg.channels, cfg.height, cfg.width)))


def generate_noisy_pair(
    cfg: SimConfig,
    seed: int | None = None,
    scene_seed: int | None = None,
) -> tuple[PlanarImage, PlanarImage]:
    """A (clean, noisy) training pair in black-subtracted DN.

    ``scene_seed`` pins the clean content independently of the noise
    draw; by default it follows ``seed``.
    """
    if seed is None:
        seed = cfg.seed
    clean = generate_scene(cfg, scene_seed if scene_seed is not None else seed)
    dark, _, _ = generate_dark(cfg, seed)
    signal = clean.data
    if cfg.apply_shot_noise:
        shot_rng = substream(seed, _SHOT)
        signal = cfg.g_true * shot_rng.poisson(clean.data / cfg.g_true).astype(np.float64)
    noisy = signal + (dark.data - cfg.black_level)
    return clean, PlanarImage(noisy)

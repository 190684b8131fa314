"""Planar CFA image tensors.

A raw mosaic is stored as a stack of per-site planes: a sensor with a
py x px CFA period packs into C = py*px planes of shape H x W. All
numerics are float64 internally; the on-disk format (see :mod:`.io`)
stores float32 payloads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _default_labels(channels: int) -> tuple[str, ...]:
    return tuple(f"c{i}" for i in range(channels))


@dataclass(frozen=True)
class PlanarImage:
    """Immutable C x H x W stack of image planes.

    Parameters
    ----------
    data : ndarray
        Array of shape (C, H, W); coerced to float64 and frozen. Every
        value must be finite.
    channel_labels : tuple of str, optional
        CFA site name per plane (e.g. ``("R", "Gr", "Gb", "B")``). The
        ordering is recorded, never inferred; defaults to ``c0..c{C-1}``.
    """

    data: np.ndarray
    channel_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim != 3:
            raise ValueError(f"expected (C, H, W) data, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ValueError(f"all dimensions must be >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("plane data contains NaN or Inf")
        labels = tuple(self.channel_labels) if self.channel_labels else _default_labels(arr.shape[0])
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

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    def plane(self, c: int) -> np.ndarray:
        """Read-only view of channel ``c``."""
        return self.data[c]

    def with_data(self, data: np.ndarray) -> "PlanarImage":
        """New image with the same labels and different pixel data."""
        return PlanarImage(data, self.channel_labels)


@dataclass(frozen=True)
class FrameMeta:
    """Acquisition metadata attached to a frame.

    ``black_level``/``white_level`` are in DN; ``exposure_tag`` is a
    free-form token such as ``"normal"`` or ``"hot"``.
    """

    iso: int
    black_level: float = 0.0
    white_level: float = 65535.0
    sensor_id: str = "unknown"
    exposure_tag: str = "normal"

    def __post_init__(self) -> None:
        if self.iso < 1:
            raise ValueError(f"iso must be a positive integer, got {self.iso}")
        if not 0 <= self.black_level < self.white_level:
            raise ValueError(
                f"need 0 <= black_level < white_level, got {self.black_level}, {self.white_level}"
            )


@dataclass(frozen=True)
class CfaPeriod:
    """CFA repetition period: ``py`` rows x ``px`` columns (Bayer: 2x2)."""

    py: int = 2
    px: int = 2

    def __post_init__(self) -> None:
        if self.py < 1 or self.px < 1:
            raise ValueError(f"period must be >= 1 in both axes, got {self.py}x{self.px}")

    @property
    def channels(self) -> int:
        return self.py * self.px


def pack_cfa(
    mosaic: PlanarImage,
    period: CfaPeriod,
    channel_labels: tuple[str, ...] | None = None,
) -> PlanarImage:
    """Split a single-plane mosaic into one plane per CFA site.

    Plane ``k`` at (h, w) equals the mosaic at
    (h*py + k // px, w*px + k % px): sites are ordered row-major within
    the period.

    Parameters
    ----------
    mosaic : PlanarImage
        Single-channel image of shape (1, H*py, W*px).
    period : CfaPeriod
        Mosaic repetition period.
    channel_labels : tuple of str, optional
        Site names to record (e.g. ``("R", "Gr", "Gb", "B")`` for an
        RGGB sensor); positional ``p{r}{c}`` labels by default.
    """
    if mosaic.channels != 1:
        raise ValueError(f"mosaic must have a single channel, got {mosaic.channels}")
    hm, wm = mosaic.height, mosaic.width
    if hm % period.py != 0 or wm % period.px != 0:
        raise ValueError(
            f"mosaic {hm}x{wm} not divisible by period {period.py}x{period.px}"
        )
    h, w = hm // period.py, wm // period.px
    planes = (
        mosaic.data[0]
        .reshape(h, period.py, w, period.px)
        .transpose(1, 3, 0, 2)
        .reshape(period.channels, h, w)
    )
    if channel_labels is None:
        channel_labels = tuple(
            f"p{r}{c}" for r in range(period.py) for c in range(period.px)
        )
    return PlanarImage(planes, channel_labels)


def unpack_cfa(planes: PlanarImage, period: CfaPeriod) -> PlanarImage:
    """Exact inverse of :func:`pack_cfa`: reassemble the mosaic."""
    if planes.channels != period.channels:
        raise ValueError(
            f"{planes.channels} planes cannot come from a {period.py}x{period.px} period"
        )
    h, w = planes.height, planes.width
    mosaic = (
        planes.data.reshape(period.py, period.px, h, w)
        .transpose(2, 0, 3, 1)
        .reshape(1, h * period.py, w * period.px)
    )
    return PlanarImage(mosaic, ("mosaic",))


def channel_means(img: PlanarImage) -> np.ndarray:
    """Spatial mean of each plane, shape (C,)."""
    return img.data.mean(axis=(1, 2))

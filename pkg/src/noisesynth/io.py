"""Bit-exact on-disk tensor format (PTB) and a 16-bit PGM importer.

PTB layout:

* bytes 0-7: ASCII magic ``PTNSRB1\\n``
* one ASCII header line ending in ``\\n``::

      dtype=f32 c=<C> h=<H> w=<W> iso=<u32> black=<f32> white=<f32> sensor=<token> tag=<token>

* C*H*W little-endian IEEE-754 float32 values, channel-major,
  row-major within each channel.

Headers are written with shortest round-tripping float reprs, so
``load -> save`` reproduces a file byte for byte. Payloads are float32:
``save -> load`` is exact whenever the in-memory data is
float32-representable (dark-frame residuals always are).
"""

from __future__ import annotations

import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .errors import PtbParseError
from .planar import FrameMeta, PlanarImage

MAGIC = b"PTNSRB1\n"

_HEADER_KEYS = ("dtype", "c", "h", "w", "iso", "black", "white", "sensor", "tag")
_TOKEN_RE = re.compile(r"^[A-Za-z0-9_.:+-]+$")
_MAX_HEADER_BYTES = 4096


def _check_token(name: str, value: str) -> str:
    if not _TOKEN_RE.match(value):
        raise ValueError(f"{name} {value!r} is not a whitespace-free token")
    return value


def _f32_repr(value: float) -> str:
    # shortest decimal string that parses back to the same float32
    return repr(float(np.float32(value)))


def atomic_write_bytes(path: str | os.PathLike, payload: bytes) -> None:
    """Write ``payload`` to ``path`` via a temp file + atomic rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def save_tensor(img: PlanarImage, meta: FrameMeta, path: str | os.PathLike) -> None:
    """Serialize ``img`` + ``meta`` to ``path`` in PTB format (atomically)."""
    if not 0 < meta.iso < 2**32:
        raise ValueError(f"iso {meta.iso} does not fit in u32")
    header = (
        f"dtype=f32 c={img.channels} h={img.height} w={img.width} "
        f"iso={meta.iso} black={_f32_repr(meta.black_level)} white={_f32_repr(meta.white_level)} "
        f"sensor={_check_token('sensor_id', meta.sensor_id)} "
        f"tag={_check_token('exposure_tag', meta.exposure_tag)}\n"
    )
    payload = img.data.astype("<f4").tobytes()
    atomic_write_bytes(path, MAGIC + header.encode("ascii") + payload)


def _parse_header(line: str, path: str) -> dict[str, str]:
    fields = line.split(" ")
    if len(fields) != len(_HEADER_KEYS):
        raise PtbParseError(f"{path}: header has {len(fields)} fields, expected {len(_HEADER_KEYS)}")
    out: dict[str, str] = {}
    for key, item in zip(_HEADER_KEYS, fields):
        k, sep, v = item.partition("=")
        if not sep or k != key or not v:
            raise PtbParseError(f"{path}: malformed header field {item!r}, expected {key}=<value>")
        out[key] = v
    return out


def _read_meta(fh, path: str) -> tuple[int, int, int, FrameMeta]:
    magic = fh.read(len(MAGIC))
    if len(magic) < len(MAGIC):
        raise PtbParseError(f"{path}: truncated file, shorter than the magic bytes")
    if magic != MAGIC:
        raise PtbParseError(f"{path}: bad magic {magic!r}, not a PTB tensor")
    raw = fh.read(_MAX_HEADER_BYTES)
    nl = raw.find(b"\n")
    if nl < 0:
        raise PtbParseError(f"{path}: truncated file, header line never terminated")
    fh.seek(len(MAGIC) + nl + 1)
    try:
        line = raw[:nl].decode("ascii")
    except UnicodeDecodeError as exc:
        raise PtbParseError(f"{path}: header is not ASCII") from exc
    fields = _parse_header(line, path)
    if fields["dtype"] != "f32":
        raise PtbParseError(f"{path}: unsupported dtype {fields['dtype']!r}")
    try:
        c, h, w = int(fields["c"]), int(fields["h"]), int(fields["w"])
        iso = int(fields["iso"])
        black = float(np.float32(float(fields["black"])))
        white = float(np.float32(float(fields["white"])))
    except ValueError as exc:
        raise PtbParseError(f"{path}: non-numeric header value ({exc})") from exc
    if min(c, h, w) < 1:
        raise PtbParseError(f"{path}: non-positive dimensions c={c} h={h} w={w}")
    if not 0 < iso < 2**32:
        raise PtbParseError(f"{path}: iso {iso} outside u32 range")
    meta = FrameMeta(
        iso=iso,
        black_level=black,
        white_level=white,
        sensor_id=fields["sensor"],
        exposure_tag=fields["tag"],
    )
    return c, h, w, meta


def load_meta(path: str | os.PathLike) -> tuple[tuple[int, int, int], FrameMeta]:
    """Read only the header: ((C, H, W), meta). Cheap for directory scans."""
    with open(path, "rb") as fh:
        c, h, w, meta = _read_meta(fh, str(path))
    return (c, h, w), meta


def load_tensor(path: str | os.PathLike) -> tuple[PlanarImage, FrameMeta]:
    """Deserialize a PTB file into (PlanarImage, FrameMeta)."""
    with open(path, "rb") as fh:
        c, h, w, meta = _read_meta(fh, str(path))
        payload = fh.read()
    expected = c * h * w
    got, rem = divmod(len(payload), 4)
    if rem != 0 or got != expected:
        raise PtbParseError(
            f"{path}: payload size mismatch, header declares {expected} values "
            f"({expected * 4} bytes) but file carries {len(payload)} bytes"
        )
    data = np.frombuffer(payload, dtype="<f4").reshape(c, h, w)
    return PlanarImage(data), meta


def import_pgm_planes(paths: list[str | os.PathLike]) -> PlanarImage:
    """Assemble a PlanarImage from 16-bit binary PGM files, one per plane."""
    planes = [_read_pgm16(p) for p in paths]
    shape = planes[0].shape
    for p, arr in zip(paths, planes):
        if arr.shape != shape:
            raise PtbParseError(f"{p}: plane shape {arr.shape} differs from first plane {shape}")
    return PlanarImage(np.stack(planes, axis=0))


def _read_pgm16(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4 and pos < len(blob):
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":
            pos = blob.find(b"\n", pos)
            if pos < 0:
                break
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        tokens.append(blob[start:pos])
    if len(tokens) < 4 or tokens[0] != b"P5":
        raise PtbParseError(f"{path}: not a binary (P5) PGM file")
    try:
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise PtbParseError(f"{path}: malformed PGM header") from exc
    if maxval != 65535:
        raise PtbParseError(f"{path}: expected 16-bit PGM (maxval 65535), got {maxval}")
    pos += 1  # single whitespace byte after maxval
    expected = width * height * 2
    payload = blob[pos : pos + expected]
    if len(payload) != expected:
        raise PtbParseError(
            f"{path}: payload size mismatch, expected {expected} bytes, got {len(payload)}"
        )
    return np.frombuffer(payload, dtype=">u2").reshape(height, width).astype(np.float64)

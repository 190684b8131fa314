import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisesynth import FrameMeta, PlanarImage, PtbParseError, load_meta, load_tensor, save_tensor
from noisesynth.io import MAGIC, import_pgm_planes


def test_round_trip_values_and_meta(tmp_path):
    data = np.arange(16, dtype=np.float64).reshape(4, 2, 2) - 3.5
    img = PlanarImage(data)
    meta = FrameMeta(iso=1600, black_level=512.0, white_level=16383.0,
                     sensor_id="camA", exposure_tag="hot")
    path = tmp_path / "frame.ptb"
    save_tensor(img, meta, path)
    loaded, loaded_meta = load_tensor(path)
    np.testing.assert_array_equal(loaded.data, img.data)
    assert loaded_meta == meta


def test_wrong_magic_names_magic(tmp_path):
    path = tmp_path / "bad.ptb"
    path.write_bytes(b"NOTPTNS\n" + b"x" * 64)
    with pytest.raises(PtbParseError, match="magic"):
        load_tensor(path)


def test_payload_size_mismatch(tmp_path):
    img = PlanarImage(np.zeros((4, 100, 100)))
    meta = FrameMeta(iso=100)
    path = tmp_path / "short.ptb"
    save_tensor(img, meta, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-4])  # drop one value: 39999 instead of 40000
    with pytest.raises(PtbParseError, match="size mismatch"):
        load_tensor(path)


def test_trailing_garbage_rejected(tmp_path):
    img = PlanarImage(np.zeros((1, 2, 2)))
    path = tmp_path / "long.ptb"
    save_tensor(img, FrameMeta(iso=1), path)
    path.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
    with pytest.raises(PtbParseError, match="size mismatch"):
        load_tensor(path)


def test_truncated_before_header(tmp_path):
    path = tmp_path / "trunc.ptb"
    path.write_bytes(MAGIC[:4])
    with pytest.raises(PtbParseError, match="truncated"):
        load_tensor(path)


def test_unterminated_header(tmp_path):
    path = tmp_path / "noheader.ptb"
    path.write_bytes(MAGIC + b"dtype=f32 c=1")
    with pytest.raises(PtbParseError, match="truncated"):
        load_tensor(path)


def test_load_meta_matches_full_load(tmp_path):
    img = PlanarImage(np.ones((2, 3, 4)))
    meta = FrameMeta(iso=3200, black_level=64.0, white_level=1023.0)
    path = tmp_path / "m.ptb"
    save_tensor(img, meta, path)
    shape, got = load_meta(path)
    assert shape == (2, 3, 4)
    assert got == load_tensor(path)[1]


def test_rejects_non_token_sensor(tmp_path):
    img = PlanarImage(np.ones((1, 1, 1)))
    meta = FrameMeta(iso=1, sensor_id="has space")
    path = tmp_path / "tok.ptb"
    with pytest.raises(ValueError, match="token"):
        save_tensor(img, meta, path)
    assert not path.exists()


@given(
    c=st.integers(1, 3),
    h=st.integers(1, 5),
    w=st.integers(1, 5),
    iso=st.integers(1, 2**32 - 1),
    black=st.integers(0, 1000),
    seed=st.integers(0, 2**32 - 1),
)
@settings(max_examples=40, deadline=None)
def test_round_trip_preserves_every_bit(tmp_path_factory, c, h, w, iso, black, seed):
    # payload is float32 on disk: feed float32-representable data
    rng = np.random.default_rng(seed)
    data = rng.normal(size=(c, h, w)).astype(np.float32).astype(np.float64)
    img = PlanarImage(data)
    meta = FrameMeta(iso=iso, black_level=float(black), white_level=float(black) + 1.5,
                     sensor_id="s_1", exposure_tag="t-2")
    path = tmp_path_factory.mktemp("ptb") / "x.ptb"
    save_tensor(img, meta, path)
    first = path.read_bytes()
    loaded, loaded_meta = load_tensor(path)
    np.testing.assert_array_equal(loaded.data, img.data)
    assert loaded_meta == meta
    save_tensor(loaded, loaded_meta, path)
    assert path.read_bytes() == first


def _write_pgm16(path, array):
    header = f"P5\n{array.shape[1]} {array.shape[0]}\n65535\n".encode("ascii")
    path.write_bytes(header + array.astype(">u2").tobytes())


def test_pgm_import(tmp_path, rng):
    planes = [rng.integers(0, 65536, size=(4, 6)).astype(np.uint16) for _ in range(3)]
    paths = []
    for i, p in enumerate(planes):
        path = tmp_path / f"plane{i}.pgm"
        _write_pgm16(path, p)
        paths.append(path)
    img = import_pgm_planes(paths)
    assert img.shape == (3, 4, 6)
    for i, p in enumerate(planes):
        np.testing.assert_array_equal(img.data[i], p.astype(np.float64))


def test_pgm_rejects_8bit(tmp_path):
    path = tmp_path / "p8.pgm"
    path.write_bytes(b"P5\n2 2\n255\n" + bytes(4))
    with pytest.raises(PtbParseError, match="16-bit"):
        import_pgm_planes([path])


def test_pgm_rejects_ascii_format(tmp_path):
    path = tmp_path / "p2.pgm"
    path.write_bytes(b"P2\n2 2\n65535\n0 0 0 0\n")
    with pytest.raises(PtbParseError, match="P5"):
        import_pgm_planes([path])


def test_pgm_shape_mismatch(tmp_path, rng):
    a = tmp_path / "a.pgm"
    b = tmp_path / "b.pgm"
    _write_pgm16(a, np.zeros((2, 2), dtype=np.uint16))
    _write_pgm16(b, np.zeros((3, 2), dtype=np.uint16))
    with pytest.raises(PtbParseError, match="differs"):
        import_pgm_planes([a, b])

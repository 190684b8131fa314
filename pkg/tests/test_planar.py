import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisesynth import CfaPeriod, FrameMeta, PlanarImage, channel_means, pack_cfa, unpack_cfa

from conftest import make_image


class TestPlanarImage:
    def test_data_is_frozen(self, rng):
        img = make_image(rng)
        with pytest.raises(ValueError):
            img.data[0, 0, 0] = 1.0

    def test_rejects_nan(self):
        bad = np.ones((1, 2, 2))
        bad[0, 0, 0] = np.nan
        with pytest.raises(ValueError, match="NaN"):
            PlanarImage(bad)

    def test_rejects_wrong_ndim(self):
        with pytest.raises(ValueError, match="C, H, W"):
            PlanarImage(np.ones((2, 2)))

    def test_rejects_label_mismatch(self):
        with pytest.raises(ValueError, match="labels"):
            PlanarImage(np.ones((2, 2, 2)), channel_labels=("a",))

    def test_default_labels(self):
        img = PlanarImage(np.ones((3, 1, 1)))
        assert img.channel_labels == ("c0", "c1", "c2")


class TestFrameMeta:
    def test_black_below_white_required(self):
        with pytest.raises(ValueError):
            FrameMeta(iso=100, black_level=10.0, white_level=10.0)
        with pytest.raises(ValueError):
            FrameMeta(iso=100, black_level=-1.0, white_level=10.0)

    def test_positive_iso_required(self):
        with pytest.raises(ValueError):
            FrameMeta(iso=0)


class TestPackCfa:
    def test_single_period_mosaic(self):
        mosaic = PlanarImage(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
        packed = pack_cfa(mosaic, CfaPeriod(2, 2))
        assert packed.shape == (4, 1, 1)
        assert packed.data.ravel().tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_identity_period(self, rng):
        mosaic = PlanarImage(rng.normal(size=(1, 5, 7)))
        packed = pack_cfa(mosaic, CfaPeriod(1, 1))
        assert packed.shape == (1, 5, 7)
        np.testing.assert_array_equal(packed.data, mosaic.data)

    def test_round_trip_and_index_formula(self, rng):
        # oracle: direct index arithmetic on a 6x6 mosaic
        mosaic = PlanarImage(rng.normal(size=(1, 6, 6)))
        period = CfaPeriod(2, 2)
        packed = pack_cfa(mosaic, period)
        for k in range(4):
            for h in range(3):
                for w in range(3):
                    assert packed.data[k, h, w] == mosaic.data[0, 2 * h + k // 2, 2 * w + k % 2]
        back = unpack_cfa(packed, period)
        np.testing.assert_array_equal(back.data, mosaic.data)

    def test_rejects_non_divisible(self, rng):
        mosaic = PlanarImage(rng.normal(size=(1, 5, 6)))
        with pytest.raises(ValueError, match="divisible"):
            pack_cfa(mosaic, CfaPeriod(2, 2))

    def test_default_positional_labels(self, rng):
        packed = pack_cfa(PlanarImage(rng.normal(size=(1, 4, 4))), CfaPeriod(2, 2))
        assert packed.channel_labels == ("p00", "p01", "p10", "p11")

    def test_explicit_bayer_labels(self, rng):
        packed = pack_cfa(
            PlanarImage(rng.normal(size=(1, 4, 4))),
            CfaPeriod(2, 2),
            channel_labels=("R", "Gr", "Gb", "B"),
        )
        assert packed.channel_labels == ("R", "Gr", "Gb", "B")


class TestUnpackCfa:
    def test_single_period(self):
        planes = PlanarImage(np.array([1.0, 2.0, 3.0, 4.0]).reshape(4, 1, 1))
        mosaic = unpack_cfa(planes, CfaPeriod(2, 2))
        np.testing.assert_array_equal(mosaic.data[0], [[1.0, 2.0], [3.0, 4.0]])

    def test_rejects_channel_mismatch(self, rng):
        planes = PlanarImage(rng.normal(size=(3, 2, 2)))
        with pytest.raises(ValueError, match="period"):
            unpack_cfa(planes, CfaPeriod(2, 2))

    def test_index_formula_oracle_rectangular(self, rng):
        # 4 planes of 3x5 with a 2x2 period -> 6x10 mosaic
        planes = PlanarImage(rng.normal(size=(4, 3, 5)))
        mosaic = unpack_cfa(planes, CfaPeriod(2, 2))
        assert mosaic.shape == (1, 6, 10)
        for k in range(4):
            for h in range(3):
                for w in range(5):
                    assert mosaic.data[0, 2 * h + k // 2, 2 * w + k % 2] == planes.data[k, h, w]

    @given(
        py=st.integers(1, 4),
        px=st.integers(1, 4),
        h=st.integers(1, 6),
        w=st.integers(1, 6),
        seed=st.integers(0, 2**32 - 1),
    )
    @settings(max_examples=60, deadline=None)
    def test_round_trip_property(self, py, px, h, w, seed):
        rng = np.random.default_rng(seed)
        mosaic = PlanarImage(rng.normal(size=(1, h * py, w * px)))
        period = CfaPeriod(py, px)
        back = unpack_cfa(pack_cfa(mosaic, period), period)
        np.testing.assert_array_equal(back.data, mosaic.data)


class TestChannelMeans:
    def test_constant_plane(self):
        assert channel_means(PlanarImage(np.full((1, 3, 3), 5.0))).tolist() == [5.0]

    def test_hand_arithmetic(self):
        img = PlanarImage(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
        assert channel_means(img).tolist() == [2.5]

    def test_matches_two_pass_summation_oracle(self, rng):
        img = make_image(rng, (4, 64, 64), loc=3.0, scale=2.0)
        got = channel_means(img)
        for c in range(4):
            total = 0.0
            for h in range(64):
                for w in range(64):
                    total += img.data[c, h, w]
            expected = total / (64 * 64)
            assert abs(got[c] - expected) <= 1e-12 * max(1.0, abs(expected))

    def test_invariant_under_spatial_permutation(self, rng):
        img = make_image(rng, (3, 8, 8))
        perm = rng.permutation(64)
        shuffled = PlanarImage(
            np.stack([img.data[c].ravel()[perm].reshape(8, 8) for c in range(3)])
        )
        np.testing.assert_allclose(channel_means(shuffled), channel_means(img), rtol=1e-12)

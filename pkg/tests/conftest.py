import numpy as np
import pytest

from noisesynth import FrameMeta, PlanarImage


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def meta():
    return FrameMeta(iso=1600, black_level=512.0, white_level=16383.0, sensor_id="testcam")


def make_image(rng, shape=(4, 32, 32), loc=0.0, scale=1.0):
    return PlanarImage(rng.normal(loc, scale, size=shape))

import numpy as np
import pytest
from hypothesis import strategies as st

from occped.geometry import BBox


def random_boxes(rng, n, extent=100.0, max_size=60.0, min_size=0.0):
    x1 = rng.uniform(0, extent, n)
    y1 = rng.uniform(0, extent, n)
    w = rng.uniform(min_size, max_size, n)
    h = rng.uniform(min_size, max_size, n)
    return np.stack([x1, y1, x1 + w, y1 + h], axis=1)


@st.composite
def bboxes(draw, lo=-1e3, hi=1e3, max_size=1e3, positive=False):
    coord = st.floats(lo, hi, allow_nan=False, allow_infinity=False)
    size = st.floats(1e-3 if positive else 0.0, max_size, allow_nan=False, allow_infinity=False)
    x1, y1 = draw(coord), draw(coord)
    return BBox(x1, y1, x1 + draw(size), y1 + draw(size))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

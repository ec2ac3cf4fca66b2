import math

import numpy as np
import pytest

from occped.anchors import CROWD_RATIOS, PEDESTRIAN_RATIOS, generate_anchor_grid, level_for_scale
from occped.errors import ConfigError, DegenerateBoxError
from occped.geometry import BBox


def test_scales_span_32_to_512():
    grid = generate_anchor_grid(100, 60, aspect_ratios=(1.0,))
    assert [lvl.stride for lvl in grid.levels] == [4, 8, 16, 32, 64]
    assert [lvl.scale for lvl in grid.levels] == [32, 64, 128, 256, 512]


def test_square_anchor_for_unit_ratio():
    grid = generate_anchor_grid(16, 16, strides=(8,), aspect_ratios=(1.0,))
    np.testing.assert_allclose(grid.anchors[0][0], [-28, -28, 36, 36])


def test_pedestrian_ratio_closed_form():
    grid = generate_anchor_grid(64, 64, strides=(4,), aspect_ratios=PEDESTRIAN_RATIOS)
    x1, y1, x2, y2 = grid.anchors[0][0]
    # independent recomputation from the closed form
    w, h = 32 / math.sqrt(2.44), 32 * math.sqrt(2.44)
    assert ((x1 + x2) / 2, (y1 + y2) / 2) == pytest.approx((2.0, 2.0))
    assert x2 - x1 == pytest.approx(w, rel=1e-12) and w == pytest.approx(20.486, abs=1e-3)
    assert y2 - y1 == pytest.approx(h, rel=1e-12) and h == pytest.approx(49.985, abs=1e-3)


def test_counts_and_lattice():
    W, H = 123, 77
    grid = generate_anchor_grid(W, H, aspect_ratios=CROWD_RATIOS)
    expected = sum(math.ceil(W / s) * math.ceil(H / s) * 3 for s in (4, 8, 16, 32, 64))
    assert len(grid) == expected == len(grid.all_anchors())
    for lvl, anchors in zip(grid.levels, grid.anchors):
        a = anchors.reshape(lvl.grid_h, lvl.grid_w, 3, 4)
        area = (a[..., 2] - a[..., 0]) * (a[..., 3] - a[..., 1])
        np.testing.assert_allclose(area, lvl.scale**2, rtol=1e-6)
        cx = (a[..., 0] + a[..., 2]) / 2
        cy = (a[..., 1] + a[..., 3]) / 2
        np.testing.assert_allclose(np.diff(cx, axis=1), lvl.stride)
        np.testing.assert_allclose(np.diff(cy, axis=0), lvl.stride)
        np.testing.assert_allclose(cx[0, :, 0], (np.arange(lvl.grid_w) + 0.5) * lvl.stride)
        # ratio is height / width
        hw = (a[..., 3] - a[..., 1]) / (a[..., 2] - a[..., 0])
        np.testing.assert_allclose(hw[0, 0], CROWD_RATIOS)


def test_config_errors():
    with pytest.raises(ConfigError):
        generate_anchor_grid(10, 10, strides=())
    with pytest.raises(ConfigError):
        generate_anchor_grid(10, 10, aspect_ratios=())
    with pytest.raises(ConfigError):
        generate_anchor_grid(10, 10, strides=(8, 4))
    with pytest.raises(ConfigError):
        generate_anchor_grid(10, 10, aspect_ratios=(-1,))


def test_level_for_scale():
    grid = generate_anchor_grid(64, 64, aspect_ratios=(1.0,))
    assert level_for_scale(BBox(0, 0, 32, 32), grid) == 0
    assert level_for_scale(BBox(0, 0, 512, 512), grid) == 4
    assert math.log(90 / 64) < math.log(128 / 90)
    assert level_for_scale(BBox(0, 0, 90, 90), grid) == 1
    with pytest.raises(DegenerateBoxError):
        level_for_scale(BBox(0, 0, 0, 5), grid)

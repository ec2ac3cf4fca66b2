import numpy as np
import pytest

from occped.augmentation import (
    IMAGENET_MEAN_RGB,
    OCCLUDABLE_PARTS,
    OcclusionPlan,
    Part,
    PartRatios,
    RasterImage,
    apply_occlusion,
    blanked_area_fraction,
    inner_pixel_rect,
    part_region,
    part_regions,
    plan_occlusion,
    read_raster,
    write_raster,
)
from occped.errors import ConfigError, DegenerateBoxError, ValidationError
from occped.geometry import BBox, iou


def test_part_regions_example():
    regions = {r.part: r.region for r in part_regions(BBox(0, 0, 40, 100))}
    assert regions == {
        Part.HEAD: BBox(0, 0, 40, 20),
        Part.LEFT_UPPER: BBox(0, 20, 20, 60),
        Part.RIGHT_UPPER: BBox(20, 20, 40, 60),
        Part.LEFT_LEG: BBox(0, 60, 20, 100),
        Part.RIGHT_LEG: BBox(20, 60, 40, 100),
    }


def test_part_regions_tile_the_box():
    rng = np.random.default_rng(0)
    for _ in range(200):
        x1, y1 = rng.uniform(-50, 50, 2)
        gt = BBox(x1, y1, x1 + rng.uniform(1, 80), y1 + rng.uniform(1, 200))
        regions = [r.region for r in part_regions(gt)]
        assert sum(r.area() for r in regions) == pytest.approx(gt.area(), rel=1e-12)
        for i in range(5):
            for j in range(i + 1, 5):
                inter = regions[i].intersection(regions[j])
                assert inter is None or inter.area() == pytest.approx(0.0, abs=1e-9 * gt.area())
        assert regions[0].area() / gt.area() == pytest.approx(0.2, rel=1e-12)
        for r in regions[1:]:
            assert r.area() / gt.area() == pytest.approx(0.2, rel=1e-12)
    with pytest.raises(DegenerateBoxError):
        part_regions(BBox(0, 0, 0, 10))
    with pytest.raises(ConfigError):
        PartRatios(0.5, 0.5)


def test_plan_extremes():
    gts = [BBox(0, 0, 10, 30)] * 50
    assert plan_occlusion(gts, 0.0, seed=1).decisions == (None,) * 50
    plan = plan_occlusion(gts, 1.0, seed=1)
    assert all(d in OCCLUDABLE_PARTS for d in plan.decisions)
    with pytest.raises(ConfigError):
        plan_occlusion(gts, 1.5)
    with pytest.raises(ValidationError):
        OcclusionPlan((Part.HEAD,))


def test_plan_deterministic_and_serializable():
    gts = [BBox(0, 0, 10, 30)] * 30
    a = plan_occlusion(gts, 0.5, seed=9)
    assert a == plan_occlusion(gts, 0.5, seed=9)
    assert OcclusionPlan.from_dict(a.to_dict()) == a


def _scene():
    img = RasterImage(np.random.default_rng(0).integers(0, 256, (120, 160, 3), dtype=np.uint8))
    gts = [BBox(10.3, 5.7, 50.2, 105.1), BBox(80, 10, 120, 110), BBox(140.5, 60.5, 175.0, 140.0)]
    return img, gts


def test_apply_identity_for_empty_plan():
    img, gts = _scene()
    out = apply_occlusion(img, gts, OcclusionPlan((None, None, None)))
    assert np.array_equal(out.pixels, img.pixels) and out.pixels is not img.pixels


def test_apply_single_part_brute_force():
    img, gts = _scene()
    plan = OcclusionPlan((Part.LEFT_LEG, None, None))
    out = apply_occlusion(img, gts, plan)
    region = part_region(gts[0], Part.LEFT_LEG)  # x 10.3..30.25, y 65.86..105.1
    fill = np.round(IMAGENET_MEAN_RGB).astype(np.uint8)
    for r in range(img.height):
        for c in range(img.width):
            inside = (np.floor(region.x1) <= c < np.ceil(region.x2)) and (np.floor(region.y1) <= r < np.ceil(region.y2))
            if inside:
                assert np.array_equal(out.pixels[r, c], fill)
            else:
                assert np.array_equal(out.pixels[r, c], img.pixels[r, c])


def test_apply_clips_to_image_and_is_idempotent():
    img, gts = _scene()
    plan = OcclusionPlan((Part.RIGHT_UPPER, Part.LEFT_UPPER, Part.RIGHT_LEG))
    once = apply_occlusion(img, gts, plan)
    twice = apply_occlusion(once, gts, plan)
    assert np.array_equal(once.pixels, twice.pixels)
    with pytest.raises(ValidationError):
        apply_occlusion(img, gts[:2], plan)


def test_head_pixels_never_touched():
    rng = np.random.default_rng(5)
    img = RasterImage(rng.integers(0, 256, (200, 200, 3), dtype=np.uint8))
    for seed in range(30):
        gts = []
        for _ in range(6):
            x1, y1 = rng.uniform(0, 150, 2)
            gts.append(BBox(x1, y1, x1 + rng.uniform(5, 50), y1 + rng.uniform(10, 120)))
        out = apply_occlusion(img, gts, plan_occlusion(gts, 1.0, seed=seed))
        for g in gts:
            others = [h for h in gts if h is not g]
            if any(iou(g, h) > 0 for h in others):
                continue  # another GT's part may legitimately cover this head
            c0, r0, c1, r1 = inner_pixel_rect(part_region(g, Part.HEAD), 200, 200)
            assert np.array_equal(out.pixels[r0:r1, c0:c1], img.pixels[r0:r1, c0:c1])


def test_single_part_blanks_a_fifth():
    img = RasterImage.blank(100, 200, 0)
    gt = BBox(0, 0, 40, 100)
    for part in OCCLUDABLE_PARTS:
        out = apply_occlusion(img, [gt], OcclusionPlan((part,)))
        changed = np.any(out.pixels != img.pixels, axis=2).sum()
        assert changed / gt.area() == pytest.approx(0.2)
        assert blanked_area_fraction([gt], OcclusionPlan((part,))) == pytest.approx(0.2)


def test_float_buffer_gets_exact_fill():
    img = RasterImage(np.zeros((20, 20, 3)))
    out = apply_occlusion(img, [BBox(0, 0, 10, 20)], OcclusionPlan((Part.RIGHT_UPPER,)))
    assert tuple(out.pixels[8, 7]) == IMAGENET_MEAN_RGB


def test_raster_io_roundtrip(tmp_path):
    img, _ = _scene()
    write_raster(img, tmp_path / "a.ppm")
    assert (tmp_path / "a.ppm").read_bytes().startswith(b"P6\n160 120\n255\n")
    assert np.array_equal(read_raster(tmp_path / "a.ppm").pixels, img.pixels)
    write_raster(img, tmp_path / "a.png")
    assert np.array_equal(read_raster(tmp_path / "a.png").pixels, img.pixels)
    with pytest.raises(ValidationError):
        RasterImage(np.zeros((4, 4)))

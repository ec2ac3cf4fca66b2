import json

import numpy as np
import pytest

from occped.augmentation import read_raster
from occped.cli import main
from occped.dataset_io import (
    REASONABLE,
    parse_annotations,
    read_annotations,
    read_detections,
    write_annotations,
    write_detections,
)
from occped.evaluation import evaluate_dataset
from occped.postprocess import postprocess
from occped.synthetic import MockDetectorConfig, SceneConfig, generate_dataset, mock_detect


@pytest.fixture
def synth_dir(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scene": {"crowding": 0.6}, "detector": {"miss_prob": 0.1, "straddle_rate": 0.4}, "n_images": 6}))
    out = tmp_path / "synth"
    assert main(["synth", "--seed", "7", "--config", str(cfg), "--out-dir", str(out), "--rasters", "--threads", "2"]) == 0
    return out


def test_usage_errors(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err
    assert main(["frobnicate"]) == 2
    assert main(["synth", "--out-dir", "x"]) == 2  # --seed is required
    assert main(["jitter", "--ann", "a"]) == 2


def test_validation_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.odann"
    bad.write_text('{"ID": "a", "width": 10, "height": 10, "gtboxes": [{"fbox": [5, 5, 1, 1]}]}\n')
    det = tmp_path / "d.oddet"
    det.write_text("")
    assert main(["eval", "--ann", str(bad), "--det", str(det)]) == 1
    assert "error" in capsys.readouterr().err
    assert main(["eval", "--ann", str(tmp_path / "missing"), "--det", str(det)]) == 1


def test_synth_matches_library(synth_dir):
    anns = generate_dataset(SceneConfig(crowding=0.6), 6, 7)
    dets = [d for a in anns for d in mock_detect(a, MockDetectorConfig(miss_prob=0.1, straddle_rate=0.4, seed=7))]
    assert (synth_dir / "annotations.odann").read_text() == write_annotations(anns)
    assert (synth_dir / "detections.oddet").read_text() == write_detections(dets)
    assert (synth_dir / "synth_00000.ppm").exists()


def test_eval_matches_library(synth_dir, tmp_path, capsys):
    ann, det = synth_dir / "annotations.odann", synth_dir / "detections.oddet"
    csv = tmp_path / "curve.csv"
    capsys.readouterr()
    assert main(["eval", "--ann", str(ann), "--det", str(det), "--subset", "reasonable", "--csv", str(csv)]) == 0
    out = json.loads(capsys.readouterr().out)
    lib = evaluate_dataset(read_annotations(ann), read_detections(det), REASONABLE)
    assert out["mr2"] == lib.mr2
    assert [p["miss_rate"] for p in out["points"]] == list(lib.miss_rates)
    assert csv.read_text().startswith("score,fppi,miss_rate\n")
    assert main(["eval", "--ann", str(ann), "--det", str(det), "--subset", "custom", "--min-height", "80", "--occ-hi", "0.5"]) == 0
    assert "mr2" in json.loads(capsys.readouterr().out)


def test_postprocess_matches_library(synth_dir, tmp_path):
    det = synth_dir / "detections.oddet"
    out = tmp_path / "pp.oddet"
    assert main(["postprocess", "--det", str(det), "--out", str(out), "--nms-iou", "0.5", "--top-k", "5"]) == 0
    assert out.read_text() == write_detections(postprocess(read_detections(det), 0.5, 5))


def test_jitter_and_match_stats(synth_dir, tmp_path, capsys):
    ann = synth_dir / "annotations.odann"
    out1, out2 = tmp_path / "j1", tmp_path / "j2"
    assert main(["jitter", "--ann", str(ann), "--seed", "3", "--out", str(out1)]) == 0
    assert main(["jitter", "--ann", str(ann), "--seed", "3", "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    jittered = parse_annotations(out1.read_text())
    originals = read_annotations(ann)
    for j, o in zip(jittered, originals):
        assert len(j.instances) <= 10 * len(o.instances)
    capsys.readouterr()
    args = ["match-stats", "--ann", str(ann), "--proposals", str(synth_dir / "detections.oddet"), "--seed", "1"]
    assert main(args + ["--threads", "1"]) == 0
    single = capsys.readouterr().out
    assert main(args + ["--threads", "4"]) == 0
    assert capsys.readouterr().out == single
    stats = json.loads(single)
    assert stats["strict"]["pos_thresh"] == 0.7 and stats["baseline"]["pos_thresh"] == 0.5
    assert stats["strict"]["straddle_count"] < stats["baseline"]["straddle_count"]
    assert stats["strict"]["n_positive"] <= stats["baseline"]["n_positive"]


def test_augment(synth_dir, tmp_path, capsys):
    out = tmp_path / "aug"
    capsys.readouterr()
    assert main(["augment", "--ann", str(synth_dir / "annotations.odann"), "--images", str(synth_dir),
                 "--out-dir", str(out), "--seed", "5", "--p", "1.0"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n_rasters_written"] == 6 and summary["missing_rasters"] == []
    plan = json.loads((out / "plan.json").read_text())
    assert set(plan) == {f"synth_{i:05d}" for i in range(6)}
    assert all(d in {"left_upper", "right_upper", "left_leg", "right_leg"} for p in plan.values() for d in p["decisions"])
    before = read_raster(synth_dir / "synth_00000.ppm").pixels
    after = read_raster(out / "synth_00000.ppm").pixels
    if plan["synth_00000"]["decisions"]:
        assert not np.array_equal(before, after)


def test_anchors_dump(tmp_path, capsys):
    assert main(["anchors", "--width", "64", "--height", "48", "--ratios", "2.44"]) == 0
    anns = parse_annotations(capsys.readouterr().out)
    assert [a.image_id for a in anns] == ["stride4_scale32", "stride8_scale64", "stride16_scale128", "stride32_scale256", "stride64_scale512"]
    assert len(anns[0].instances) == 16 * 12
    assert main(["anchors", "--width", "64", "--height", "48", "--strides", "8", "4"]) == 1

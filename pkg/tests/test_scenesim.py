import numpy as np
import pytest

from groupmot.errors import ConfigError
from groupmot.model import SequenceMeta, iou
from groupmot.scenesim import (
    VARIANTS,
    SceneConfig,
    ablation_bench,
    generate,
    gt_centers,
    run_variant,
    sample_tracks,
)

SHORT = SceneConfig(frames=40, seed=3)
CLEAN = dict(jitter_std=0.0, bbox_noise_std=0.0, occlusion_rate=0.0, miss_rate=0.0, fp_rate=0.0, score_std=0.0)


def test_noiseless_detections_equal_gt():
    scene = generate(SHORT.replace(**CLEAN))
    for f, items in scene.gt.items():
        dets = sorted(d.bbox.to_array().tolist() for d in scene.detections[f])
        assert dets == sorted(b.to_array().tolist() for _, b in items)


def test_explicit_occlusion_removes_detections():
    scene = generate(SHORT.replace(occlusion_rate=0.0, occlusions=((3, 10, 15),)))
    assert (10, 15) in scene.occluded[3]
    for f in range(10, 16):
        gt3 = dict(scene.gt[f])[3]
        others = [dict(scene.gt[f])[t] for t in dict(scene.gt[f]) if t != 3]
        for d in scene.detections[f]:
            # a detection of another target may overlap target 3; a detection of 3 itself may not
            if iou(d.bbox, gt3) > 0.3:
                assert any(iou(d.bbox, o) > 0.3 for o in others)


def test_occlusion_rate_budget():
    cfg = SceneConfig(frames=100, seed=1)
    scene = generate(cfg)
    for t, spans in scene.occluded.items():
        hidden = sum(e - s + 1 for s, e in spans)
        assert hidden <= round(cfg.occlusion_rate * cfg.frames)
        assert all(1 <= s <= e <= cfg.frames for s, e in spans)


def test_generation_is_deterministic():
    a, b = generate(SHORT), generate(SHORT)
    assert a.gt == b.gt and a.detections == b.detections
    assert generate(SHORT.replace(seed=4)).gt != a.gt


def test_groups_move_together():
    scene = generate(SceneConfig(frames=60, seed=0, jitter_std=0.0))
    centers = gt_centers(scene)
    members = [t for t, g in scene.group_of.items() if g == 0]
    disp = [np.subtract(centers[t][-1][1:], centers[t][0][1:]) for t in members]
    assert np.allclose(disp, disp[0], atol=1.0)


def test_scores_and_sizes():
    scene = generate(SHORT)
    for dets in scene.detections.values():
        for d in dets:
            assert 0.0 <= d.score <= 1.0
            assert d.bbox.width > 0 and d.bbox.height > 0


@pytest.mark.parametrize("kw", [
    dict(occlusion_rate=1.5), dict(frames=8), dict(occlusions=((99, 1, 2),)),
    dict(occlusions=((1, 5, 2),)), dict(occlusion_len=(0, 3)), dict(speed_min=3.0, speed_max=1.0),
])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        generate(SceneConfig(**kw))


def test_config_dict_round_trip():
    cfg = SceneConfig(occlusions=((1, 10, 12),), seed=9)
    assert SceneConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        SceneConfig.from_dict({"bogus": 1})


def test_sample_tracks_cover_image():
    cfg = SceneConfig()
    tracks = sample_tracks(cfg, 200, 9, seed=0)
    assert len(tracks) == 200 and all(len(v) == 9 for v in tracks.values())
    xs = np.array([v[0][1] for v in tracks.values()])
    assert xs.min() < 0.1 * cfg.image_width and xs.max() > 0.9 * cfg.image_width


def test_variants_run_and_noiseless_baseline_is_perfect_identity():
    scene = generate(SceneConfig(frames=40, seed=2, **CLEAN))
    rep = run_variant(scene, "baseline-KF")
    assert rep.IDSW == 0 and rep.FP == 0
    with pytest.raises(ValueError):
        run_variant(scene, "+STMP")
    with pytest.raises(ValueError):
        run_variant(scene, "nope")


def test_bench_shape():
    res = ablation_bench(SceneConfig(frames=30), 2, variants=VARIANTS[:3])
    assert res.seeds == [0, 1]
    assert set(res.reports) == set(VARIANTS[:3])
    assert all(len(v) == 2 for v in res.reports.values())
    assert "IDSW" in res.table()

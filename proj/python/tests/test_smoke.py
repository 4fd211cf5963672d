import numpy as np
import pytest

import relocc


def test_geometry():
    a = relocc.Box(0.0, 0.0, 0.5, 0.5)
    b = relocc.Box(0.25, 0.25, 0.75, 0.75)
    assert relocc.iou(a, a) == 1.0
    assert relocc.iou(a, b) == pytest.approx(0.0625 / 0.4375)
    assert relocc.giou(a, b) <= relocc.iou(a, b)
    assert relocc.intersects(a, b)

    g = relocc.generalized_intersection_box(a, b)
    assert (g.x_min, g.y_min, g.x_max, g.y_max) == (0.25, 0.25, 0.5, 0.5)


def test_git_matches_middle_two_sort():
    rng = np.random.default_rng(5)
    for _ in range(200):
        ax = np.sort(rng.uniform(size=2))
        ay = np.sort(rng.uniform(size=2))
        bx = np.sort(rng.uniform(size=2))
        by = np.sort(rng.uniform(size=2))
        g = relocc.generalized_intersection_box(
            relocc.Box(ax[0], ay[0], ax[1], ay[1]),
            relocc.Box(bx[0], by[0], bx[1], by[1]),
        )
        xs = np.sort(np.concatenate([ax, bx]))
        ys = np.sort(np.concatenate([ay, by]))
        assert (g.x_min, g.x_max) == (xs[1], xs[2])
        assert (g.y_min, g.y_max) == (ys[1], ys[2])


def test_positional_encoding():
    pe = relocc.positional_encoding(4, 6, 32)
    assert pe.shape == (24, 32)
    assert np.abs(pe).max() <= 1.0 + 1e-12


def test_hungarian():
    cost = np.array([[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])
    assignment, total = relocc.hungarian_match(cost)
    assert list(assignment) == [1, 0, 2]
    assert total == pytest.approx(5.0)


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    cfg = relocc.GenConfig()
    cfg.width = cfg.height = 64
    cfg.num_categories = 4
    cfg.max_objects = 3
    out = tmp_path_factory.mktemp("data")
    return relocc.synthesize_dataset(3, cfg, train=6, val=0, test=3, out_dir=str(out))


def test_dataset_round_trip(dataset):
    again = relocc.load_dataset(dataset.dir)
    assert len(again.records) == 9
    assert (again.width, again.num_categories) == (64, 4)
    rec = next(r for r in again.records if r.split == "test")
    n = relocc.Dataset.annotated_object_count(rec)
    assert len(rec.pairs) == n * (n - 1)
    img = relocc.load_png(again.image_path(rec.image_id))
    assert img.shape == (64, 64, 3) and img.dtype == np.uint8


@pytest.fixture(scope="module")
def model():
    cfg = relocc.ModelConfig()
    cfg.image_h = cfg.image_w = 64
    cfg.hidden_dim = 32
    cfg.backbone_channels = 24
    cfg.encoder_layers = 2
    cfg.pair_layers = 2
    cfg.distance_layers = cfg.occlusion_layers = 1
    cfg.num_queries = 12
    cfg.num_classes = 4
    cfg.ffn_hidden = 48
    return relocc.Model(cfg, init_seed=9)


def test_predict_shapes_and_normalization(model, dataset):
    rec = dataset.records[0]
    ps = model.predict_png(dataset.image_path(rec.image_id))
    assert ps.p_a.shape == (12, 5) and ps.p_d.shape == (12, 4)
    assert np.allclose(ps.p_a.sum(axis=1), 1.0, atol=1e-6)
    assert np.allclose(ps.p_o.sum(axis=1), 1.0, atol=1e-6)
    assert ps.box_a.shape == (12, 4) and ps.box_int.shape == (12, 4)
    assert model.token_grid(64, 64) == (2, 2)


def test_inference_and_evaluation_pipeline(model, dataset):
    preds, gts = [], []
    for rec in dataset.records:
        if rec.split != "test":
            continue
        ps = model.predict(relocc.load_png(dataset.image_path(rec.image_id)))
        kept = relocc.select_for_eval(
            relocc.nms(relocc.materialize(ps)),
            relocc.Dataset.annotated_object_count(rec),
        )
        assert all(p.confidence <= 1.0 for p in kept)
        preds.append(relocc.ImagePredictions(rec.image_id, kept))
        gts.append(rec)
    m = relocc.evaluate(preds, gts)
    assert m.distance.gt == sum(len(r.pairs) for r in gts)
    assert m.distance.tp + m.distance.fp == sum(len(p.preds) for p in preds)
    assert 0.0 <= m.occlusion.f1() <= 1.0
    assert '"distance"' in relocc.metrics_report(m)


def test_model_save_load_round_trip(model, dataset, tmp_path):
    path = str(tmp_path / "model.bin")
    model.save(path)
    again = relocc.Model.load(path)
    img = relocc.load_png(dataset.image_path(dataset.records[0].image_id))
    assert np.array_equal(model.predict(img).p_d, again.predict(img).p_d)

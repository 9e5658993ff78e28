import math

import numpy as np
import pytest

import descreg

QUICK = "sim.regions_per_class = 40\nsim.images = 80\nepochs = 3\n"


@pytest.fixture(scope="module")
def dataset():
    return descreg.simulate(descreg.RunConfig(QUICK))


def test_harmonic_mean():
    assert descreg.harmonic_mean(68.7, 7.9) == pytest.approx(14.17, abs=0.01)
    assert descreg.harmonic_mean(0.0, 0.0) == 0.0


def test_softmax_rows():
    rng = np.random.default_rng(0)
    raw = descreg.cosine_matrix(rng.normal(size=(6, 4)))
    assert np.array_equal(np.diag(raw), np.ones(6))
    s = descreg.self_excluding_softmax(raw, 0.03)
    off = s - np.diag(np.diag(s))
    assert np.allclose(off.sum(axis=1), 1.0, atol=1e-12)
    assert np.array_equal(np.diag(s), np.diag(raw))


def test_triplet_loss_hinge():
    w = np.array([[0.0], [1.0], [2.0]])
    value, grad = descreg.triplet_loss(w, 0, 2, 1, 0.5)
    assert value == 1.5
    assert grad[:, 0].tolist() == [0.0, -1.0, 1.0]
    value, grad = descreg.triplet_loss(w, 0, 1, 2, 0.5)
    assert value == 0.0 and not grad.any()


def test_direct_reg_matches_definition():
    rng = np.random.default_rng(1)
    w = rng.normal(size=(4, 3))
    s = descreg.self_excluding_softmax(descreg.cosine_matrix(rng.normal(size=(4, 5))), 1.0)
    value, grad = descreg.direct_similarity_reg(w, s)
    u = w / np.linalg.norm(w, axis=1, keepdims=True)
    mask = ~np.eye(4, dtype=bool)
    assert value == pytest.approx(np.mean(((u @ u.T - s) ** 2)[mask]), rel=1e-12)
    assert grad.shape == w.shape


def test_crop_plan():
    windows = descreg.crop_plan(2000, 800)
    assert [w[0] for w in windows if w[1] == 0] == [0, 600, 1200]
    assert descreg.crop_plan(700, 700) == [(0, 0, 800, 800, 100, 100)]


def test_config_errors():
    with pytest.raises(descreg.ConfigError):
        descreg.RunConfig("lr = fast\n")
    c = descreg.RunConfig()
    c.set("seed", "7")
    assert c.seed == 7
    assert "seed = 7" in c.text()
    assert len(descreg.config_keys()) > 10


def test_dataset_shapes(dataset):
    n = len(dataset.class_names)
    assert len(dataset.seen) + len(dataset.unseen) == n
    assert dataset.prototypes.shape[0] == n
    assert dataset.train_features.shape[0] == len(dataset.train_labels)
    unseen = set(range(len(dataset.seen), n))
    assert not unseen & set(dataset.train_labels)


def test_train_infer_evaluate(dataset):
    model, history = descreg.train(dataset, descreg.RunConfig(QUICK))
    assert len(history) == 3
    assert all(math.isfinite(h["cls_loss"]) for h in history)
    assert model.class_weights().shape[0] == len(dataset.class_names)
    restored = descreg.AlignmentModel.from_text(model.text())
    assert restored.text() == model.text()

    dets = descreg.infer(model, dataset, descreg.Setting.GZSD)
    report = descreg.evaluate(dets, dataset, descreg.Setting.GZSD)
    for key in ("map_unseen", "map_seen", "map_hm"):
        assert 0.0 <= report[key] <= 1.0
    zsd = descreg.evaluate(descreg.infer(model, dataset, descreg.Setting.ZSD), dataset, descreg.Setting.ZSD)
    assert "map_seen" not in zsd


def test_model_parse_error():
    with pytest.raises(descreg.FormatError):
        descreg.AlignmentModel.from_text("not a model\n")


def test_reproduce_summary(tmp_path):
    cfg = descreg.RunConfig(QUICK + "reproduce.seeds = 1\nreproduce.modes = off, adaptive\n")
    rows = descreg.reproduce(cfg, str(tmp_path))
    assert [r["variant"] for r in rows] == ["off", "adaptive"]
    assert (tmp_path / "comparison.csv").exists()

import json

import numpy as np
import pytest

import dualref

SMALL = dict(feature_dim=12, batch_p=4, k_rr=7, k_pos=3, fine_clusters=2, eps_percentile=5.0, min_pts=2, epochs=2,
             lr_decay_epochs=[1], pretrain_epochs=3, pretrain_warmup_epochs=1, pretrain_decay_epochs=[2], seed=3)


@pytest.fixture(scope="module")
def data():
    return dualref.generate_synthetic(ids=10, per_id=8, cameras=3, d_in=12, rank=5, seed=1)


def test_config_defaults_and_errors():
    cfg = dualref.default_config()
    assert cfg["alpha"] == 0.5 and cfg["mu"] == 0.1
    with pytest.raises(dualref.ConfigError, match="alpha"):
        dualref.validate_config({"alpha": 1.3})
    with pytest.raises(dualref.ConfigError):
        dualref.validate_config({"not_a_key": 1})


def test_synthetic_shapes(data):
    src = data["source"]
    assert src["raw"].shape == (80, 12)
    assert len(src["identity"]) == 80
    assert set(data) == {"source", "target_train", "query", "gallery"}


def test_jaccard_matches_numpy_reference():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(9, 3))
    k = 3
    d = np.linalg.norm(x[:, None] - x[None], axis=2)
    rank = np.argsort(np.argsort(d, axis=1, kind="stable"), axis=1, kind="stable")
    knn = rank <= k  # self has rank 0
    mutual = knn & knn.T
    s = np.where(mutual, np.exp(-d), 0.0)
    lo = np.minimum(s[:, None, :], s[None, :, :]).sum(axis=2)
    hi = np.maximum(s[:, None, :], s[None, :, :]).sum(axis=2)
    ref = 1.0 - lo / hi
    np.fill_diagonal(ref, 0.0)
    np.testing.assert_allclose(dualref.jaccard_distance(x, k), ref, atol=1e-12)


def test_fscore_hand_case():
    f = dualref.pairwise_fscore([0, 0, 0, 1], [0, 0, 1, 1])
    assert (f["tp"], f["fp"], f["fn"]) == (1, 2, 1)
    assert f["fscore"] == pytest.approx(0.4)


def test_kmeans_and_dbscan():
    pts = np.array([[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0]])
    km = dualref.kmeans(pts, 2, seed=0)
    assert km["inertia"] == pytest.approx(0.01)
    d = np.linalg.norm(pts[:, None] - pts[None], axis=2)
    assert dualref.dbscan(d, 0.5, 2) == [0, 0, 1, 1]


def test_pipeline(data, tmp_path):
    enc, report = dualref.pretrain(data["source"], SMALL)
    assert enc.d_out == 12 and len(report["epoch_loss"]) == 3
    before = dualref.evaluate(enc, data["query"], data["gallery"])
    assert 0.0 < before["mAP"] <= 1.0
    labels = dualref.cluster(enc, data["target_train"]["raw"], SMALL, data["target_train"]["identity"])
    assert len(labels["coarse"]) == 80 and "fscore_refined" in labels
    adapted, bank, epochs = dualref.adapt(enc, data["target_train"]["raw"], SMALL, run_dir=str(tmp_path / "run"))
    assert len(epochs) == 2
    np.testing.assert_allclose(np.linalg.norm(bank, axis=1), 1.0, atol=1e-9)
    assert (tmp_path / "run" / "metrics.csv").exists()
    adapted.save(str(tmp_path / "enc"))
    again = dualref.Encoder.load(str(tmp_path / "enc"))
    np.testing.assert_allclose(again.parameters(), adapted.parameters(), rtol=1e-6, atol=1e-7)


def test_cli_in_process(tmp_path):
    code, out, _ = dualref.run_cli("--seed", 2, "--out", tmp_path / "d", "gen-data", "--ids", 6, "--per-id", 4)
    assert code == 0
    assert json.loads(out)["splits"]["source"] == 24
    assert dualref.run_cli("gen-data")[0] == 2

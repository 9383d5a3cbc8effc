import math

import numpy as np
import pytest

import lrpseg


def test_scene_shapes_and_determinism():
    img, mask = lrpseg.generate_scene(seed=3)
    assert img.shape == (3, 64, 64) and img.dtype == np.float32
    assert mask.shape == (64, 64)
    assert 0.005 <= mask.mean() <= 0.08
    img2, mask2 = lrpseg.generate_scene(seed=3)
    assert np.array_equal(img, img2) and np.array_equal(mask, mask2)
    _, empty = lrpseg.generate_scene(seed=3, has_crack=False)
    assert empty.sum() == 0


def test_explain_conserves_logit_under_zero_like_rules():
    net = lrpseg.Network.random("toy", seed=5)
    img, _ = lrpseg.generate_scene(seed=1)
    logits = net.logits(img)
    heat = net.explain(img, rules="ours", target=0)
    assert heat.shape == (64, 64)
    assert np.isfinite(heat).all()
    assert net.classify(img) in ("damage", "no_damage")
    # epsilon absorbs some relevance, so only the sign and magnitude order are checked here
    assert abs(heat.sum()) <= abs(logits[0]) * 1.5 + 1e-3


def test_weights_round_trip(tmp_path):
    net = lrpseg.Network.random("toy", seed=2)
    path = tmp_path / "w.lrpw"
    net.save(path)
    again = lrpseg.Network.load(path)
    img, _ = lrpseg.generate_scene(seed=9)
    assert list(again.logits(img)) == list(net.logits(img))
    assert (tmp_path / "w.lrpw").read_bytes()[:4] == b"LRPW"


def test_bad_weight_file_raises_format_error(tmp_path):
    path = tmp_path / "bad.lrpw"
    path.write_bytes(b"NOPE")
    with pytest.raises(lrpseg.FormatError):
        lrpseg.Network.load(path)


def test_segment_methods():
    rng = np.random.default_rng(0)
    m = rng.normal(0.0, 0.05, size=(32, 32)).astype(np.float32)
    m[10:14, 5:28] += 1.0
    for method in ("simple", "gmm", "bmm"):
        mask, score, status = lrpseg.segment(m, method=method, seed=7)
        assert mask.shape == (32, 32)
        assert status in ("ok", "warning")
        if method == "simple":
            assert score is None
        else:
            assert np.array_equal(mask.astype(bool), score > 0.5)
        assert mask[11, 15] == 1


def test_mean_filter_spike():
    m = np.zeros((9, 9), np.float32)
    m[4, 4] = 25.0
    f = lrpseg.mean_filter_5x5(m)
    assert np.allclose(f[2:7, 2:7], 1.0)
    assert f.sum() == pytest.approx(25.0)


def test_beta_functions():
    assert lrpseg.beta_pdf(0.5, 1.0, 1.0) == pytest.approx(1.0)
    assert lrpseg.beta_cdf(0.3, 1.0, 1.0) == pytest.approx(0.3)
    assert lrpseg.beta_cdf(0.5, 2.0, 2.0) == pytest.approx(0.5)
    with pytest.raises(lrpseg.DataError):
        lrpseg.beta_pdf(1.5, 1.0, 1.0)


def test_fit_bmm_recovers_components():
    rng = np.random.default_rng(1)
    x = np.concatenate([rng.beta(1.2, 8, 9000), rng.beta(8, 1.5, 1000)])
    comps, post = lrpseg.fit_bmm(x)
    (wb, ab, bb), (wd, ad, bd) = comps
    assert ad / (ad + bd) > ab / (ab + bb)
    assert wd == pytest.approx(0.1, abs=0.03)
    assert len(post) == len(x)


def test_fit_gmm_log_likelihood_non_decreasing():
    rng = np.random.default_rng(2)
    x = np.concatenate([rng.normal(0, 1, 300), rng.normal(5, 0.5, 200), rng.normal(10, 2, 100)])
    comps, ll = lrpseg.fit_gmm(x, seed=4)
    assert math.isclose(sum(c[0] for c in comps), 1.0, abs_tol=1e-9)
    assert all(b >= a - 1e-8 for a, b in zip(ll, ll[1:]))


def test_metrics():
    pred = np.array([1, 1, 0, 0], np.uint8)
    truth = np.array([1, 0, 1, 0], np.uint8)
    c = lrpseg.confusion(pred, truth)
    assert (c["tp"], c["fp"], c["fn"], c["tn"]) == (1, 1, 1, 1)
    assert c["iou"] == pytest.approx(1 / 3)
    assert lrpseg.confusion(np.zeros(4, np.uint8), np.zeros(4, np.uint8))["iou"] is None

    curve = lrpseg.pr_curve([np.array([0.5, 0.5, 0.5, 0.5], np.float32)], [truth])
    assert curve["no_skill_precision"] == pytest.approx(0.5)
    assert curve["points"][0][1:] == pytest.approx((0.5, 1.0))


def test_dataset_and_short_training(tmp_path):
    counts = lrpseg.write_dataset(tmp_path / "data", n_pos=10, n_neg=10, seed=1)
    assert counts == (12, 12, 12)
    assert (tmp_path / "data" / "manifest.csv").exists()
    log = lrpseg.train_toy(tmp_path / "data", tmp_path / "w.lrpw", seed=1, epochs=1)
    assert len(log) == 1 and math.isfinite(log[0][1])
    net = lrpseg.Network.load(tmp_path / "w.lrpw")
    assert net.variant == "toy"

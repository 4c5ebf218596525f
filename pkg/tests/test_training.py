import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphite.graph import build_graph
from graphite.io import SynthParams, synth_heterophilic
from graphite.model import ModelConfig, Params, init_params
from graphite.training import (
    AdamState, TrainConfig, accuracy, adam_step, config_hash, evaluate, make_splits, roc_auc, train,
    train_replicates, worker_count,
)
from graphite.transform import graphite_transform

SMALL = ModelConfig(num_layers=1, hidden_dim=8, dropout_rate=0.0)


@pytest.fixture(scope="module")
def synth():
    return synth_heterophilic(SynthParams(num_nodes=60, num_classes=3, num_features=15, p_in=0.0, p_out=0.1,
                                          features_per_class=5, feature_noise_prob=0.3, seed=1))


def labelled_graph(n):
    return build_graph([(0, 1)], None, np.arange(n) % 2, num_nodes=n, num_features=0)


def test_split_sizes_and_disjointness():
    g = labelled_graph(100)
    s = make_splits(g, "48/32/20", seed=0, replicates=3)
    for sp in s:
        assert (len(sp.train), len(sp.val), len(sp.test)) == (48, 32, 20)
        assert len(set(sp.train) | set(sp.val) | set(sp.test)) == 100
    s6 = make_splits(g, "60/20/20", seed=0, replicates=1)[0]
    assert (len(s6.train), len(s6.val), len(s6.test)) == (60, 20, 20)


def test_splits_reproducible_and_distinct():
    g = labelled_graph(60)
    a = make_splits(g, seed=4)
    b = make_splits(g, seed=4)
    assert [x.identity() for x in a] == [x.identity() for x in b]
    assert len({x.identity() for x in a}) == 10


def test_splits_skip_unlabelled():
    g = build_graph([(0, 1)], None, [0, 1, -1, 0, 1, -1, 0, 1, 0, 1, 0, 1], num_nodes=12, num_classes=2,
                    num_features=0)
    sp = make_splits(g, seed=0, replicates=1)[0]
    used = set(sp.train) | set(sp.val) | set(sp.test)
    assert 2 not in used and 5 not in used and len(used) == 10


def test_splits_too_small():
    with pytest.raises(ValueError):
        make_splits(labelled_graph(2), seed=0)


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10).filter(lambda x: abs(x) > 1e-3), st.floats(1e-4, 1e-1))
def test_adam_first_step_moves_by_learning_rate(g, lr):
    p = Params(w=np.array([[0.5]]))
    adam_step(p, {"w": np.array([[g]])}, AdamState(), TrainConfig(learning_rate=lr))
    # bias-corrected m/sqrt(v) is sign(g) at t=1
    assert p["w"][0, 0] == pytest.approx(0.5 - lr * np.sign(g), rel=1e-6, abs=1e-9)


def test_adam_zero_grad_keeps_params_and_decays_moments():
    p = Params(w=np.array([[1.0, 2.0]]))
    st_ = AdamState()
    cfg = TrainConfig(learning_rate=0.1)
    adam_step(p, {"w": np.array([[1.0, -1.0]])}, st_, cfg)
    before = p["w"].copy()
    m1 = st_.m["w"].copy()
    adam_step(p, {"w": np.zeros((1, 2))}, st_, cfg)
    np.testing.assert_allclose(st_.m["w"], 0.9 * m1)
    # the bias-corrected first moment is still nonzero, so params still move
    assert not np.array_equal(p["w"], before)
    q = Params(w=np.array([[1.0]]))
    adam_step(q, {"w": np.zeros((1, 1))}, AdamState(), cfg)
    assert q["w"][0, 0] == 1.0


def test_adam_shape_mismatch():
    with pytest.raises(ValueError):
        adam_step(Params(w=np.zeros((2, 2))), {"w": np.zeros((2, 1))}, AdamState(), TrainConfig())


def test_auc_examples():
    idx = np.arange(4)
    assert roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1], idx) == 0.75
    assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1], idx) == 1.0
    assert roc_auc([0.5] * 4, [0, 1, 0, 1], idx) == 0.5
    with pytest.raises(ValueError):
        roc_auc([0.1, 0.2], [1, 1], np.arange(2))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 1)), min_size=2, max_size=30))
def test_auc_matches_pair_count(pairs):
    s = [float(a) for a, _ in pairs]
    y = [b for _, b in pairs]
    if len(set(y)) < 2:
        return
    pos = [a for a, b in zip(s, y) if b]
    neg = [a for a, b in zip(s, y) if not b]
    want = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg) / (len(pos) * len(neg))
    assert roc_auc(s, y, np.arange(len(s))) == pytest.approx(want, abs=1e-12)


def test_accuracy():
    logits = np.array([[1.0, 0.0], [0.0, 1.0], [2.0, 2.0]])
    assert accuracy(logits, [0, 0, 0], [0, 1, 2]) == pytest.approx(2 / 3)
    assert evaluate(logits, np.array([0, 1, 0]), [0, 1, 2], "accuracy") == 1.0


def test_steps_zero_reports_untrained_metrics(synth):
    sp = make_splits(synth, seed=0, replicates=1)[0]
    r = train(graphite_transform(synth), sp, SMALL, TrainConfig(steps=0, seed=0))
    assert r.best_step == 0 and r.losses == []
    assert 0.0 <= r.best_test <= 1.0
    assert r.final_test == r.best_test


def test_zero_learning_rate_keeps_params(synth):
    t = graphite_transform(synth)
    sp = make_splits(synth, seed=0, replicates=1)[0]
    p0 = init_params(t.x_star.shape[1], synth.num_classes, SMALL, seed=0)
    r = train(t, sp, SMALL, TrainConfig(learning_rate=0.0, steps=5, seed=0), params=p0)
    for k in p0:
        np.testing.assert_array_equal(r.best_params[k], p0[k])


def test_loss_decreases(synth):
    t = graphite_transform(synth)
    sp = make_splits(synth, seed=0, replicates=1)[0]
    r = train(t, sp, SMALL, TrainConfig(learning_rate=0.01, steps=60, seed=0))
    assert np.mean(r.losses[-10:]) < np.mean(r.losses[:10])
    assert r.final_train > 1 / synth.num_classes


def test_training_is_reproducible(synth):
    t = graphite_transform(synth)
    sp = make_splits(synth, seed=0, replicates=1)[0]
    cfg = ModelConfig(num_layers=1, hidden_dim=8, dropout_rate=0.2)
    a = train(t, sp, cfg, TrainConfig(learning_rate=0.01, steps=10, seed=3))
    b = train(t, sp, cfg, TrainConfig(learning_rate=0.01, steps=10, seed=3))
    assert a.to_lines() == b.to_lines()


def test_report_lines(synth):
    sp = make_splits(synth, seed=0, replicates=1)[0]
    r = train(synth, sp, SMALL, TrainConfig(learning_rate=0.01, steps=3, seed=0))
    lines = r.to_lines()
    assert len(lines) == 5
    assert '"kind": "header"' in lines[0] and '"kind": "summary"' in lines[-1]
    assert r.config_hash == config_hash(SMALL, TrainConfig(learning_rate=0.01, steps=3, seed=0))


def test_replicates_in_order(synth, monkeypatch):
    monkeypatch.setenv("GRAPHITE_THREADS", "1")
    assert worker_count(5) == 1
    splits = make_splits(synth, seed=0, replicates=3)
    rs = train_replicates(synth, splits, SMALL, TrainConfig(learning_rate=0.01, steps=2, seed=0))
    assert [r.replicate for r in rs] == [0, 1, 2]
    assert [r.seed for r in rs] == [0, 1, 2]


def test_invalid_train_config():
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1)
    with pytest.raises(ValueError):
        TrainConfig(metric="f1")

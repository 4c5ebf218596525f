import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphite.graph import build_graph
from graphite.model import (
    ModelConfig, aggregate, forward, gate_score, init_params, load_params, message_plan, save_params,
    weighted_degrees, zero_params,
)
from graphite.transform import TransformedGraph, graphite_transform

import oracles
from conftest import random_small_graph


def cfg(**kw):
    base = dict(num_layers=2, hidden_dim=4, dropout_rate=0.0)
    base.update(kw)
    return ModelConfig(**base)


def test_config_validation():
    for bad in (dict(w_x=0), dict(tau=-1), dict(dropout_rate=1.0), dict(hidden_dim=0), dict(w_e=2.0)):
        with pytest.raises(ValueError):
            cfg(**bad)


def test_degree_examples():
    # node 0: two graph neighbours and three features, 1 + 2*1 + 3*0.5
    g = build_graph([(0, 1), (0, 2)], [{0, 1, 2}, set(), set()], num_nodes=3)
    d = weighted_degrees(graphite_transform(g), cfg(w_0=1.0, w_x=0.5))
    assert d[0] == 4.5
    assert d[1] == d[2] == 2.0
    # feature node with five members
    g = build_graph([(0, 1)], [{0}] * 5 + [set()], num_nodes=6)
    t = graphite_transform(g)
    d = weighted_degrees(t, cfg(w_0=0.1, w_x=0.6))
    assert d[6] == pytest.approx(3.1, abs=1e-15)
    assert d[5] == pytest.approx(0.1)  # isolated graph node


def test_gate_examples():
    assert gate_score([1, 2], [3, 4], [0, 0, 0, 0], 0.0, 1.0) == 0.0
    assert gate_score([1, 0], [0, 0], [0.5, 0, 0, 0], 0.0, 0.5) == pytest.approx(math.tanh(1), abs=1e-15)
    assert gate_score([1, 0], [0, 0], [0.5, 0, 0, 0], 0.0, 0.5) == pytest.approx(0.7616, abs=1e-4)
    with pytest.raises(ValueError):
        gate_score([1], [1, 2], [0, 0], 0, 1)


def test_isolated_node_aggregation():
    g = build_graph([], None, num_nodes=1, num_features=0)
    t = TransformedGraph.identity(g)
    c = cfg(hidden_dim=3, w_0=0.7)
    p = init_params(0, 1, c)
    p["layer0.a"][:] = 0
    p["layer0.b"][:] = 0.3
    h = np.array([[1.0, -2.0, 0.5]])
    np.testing.assert_allclose(aggregate(t, h, p, c), math.tanh(0.3) * h, atol=1e-15)


def test_two_node_edge_with_saturated_gates():
    g = build_graph([(0, 1)], None, num_nodes=2, num_features=0)
    t = TransformedGraph.identity(g)
    c = cfg(hidden_dim=2, w_0=1.0)
    p = init_params(0, 1, c)
    p["layer0.a"][:] = 0
    p["layer0.b"][:] = 50.0  # tanh saturates to exactly 1
    h = np.array([[1.0, 3.0], [5.0, -1.0]])
    out = aggregate(t, h, p, c)
    np.testing.assert_allclose(out[0], h[0] / 2 + h[1] / 2, atol=1e-15)
    np.testing.assert_allclose(out[1], h[0] / 2 + h[1] / 2, atol=1e-15)


def _dense_check(g, c, seed):
    t = graphite_transform(g)
    rng = np.random.default_rng(seed)
    p = init_params(t.x_star.shape[1], max(g.num_classes, 1), c, seed=seed)
    p["layer0.b"][:] = rng.normal()
    h = rng.normal(size=(t.num_nodes, c.hidden_dim))
    mat = oracles.gated_matrix(t, h, p["layer0.a"][:, 0], p["layer0.b"][0, 0], c.tau, c.w_0, c.w_x)
    np.testing.assert_allclose(aggregate(t, h, p, c), mat @ h, rtol=0, atol=1e-12)


def test_fig1_aggregation_matches_dense(fig1):
    _dense_check(fig1, cfg(w_x=0.6, w_0=1.0, tau=1.0), 0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_aggregation_matches_dense_random(seed):
    rng = np.random.default_rng(seed)
    g = random_small_graph(rng, max_nodes=30)
    c = cfg(w_x=float(rng.uniform(0.1, 2)), w_0=float(rng.uniform(0.1, 2)), tau=float(rng.uniform(0.2, 3)))
    _dense_check(g, c, seed)


def test_zero_params_give_zero_logits(fig1):
    t = graphite_transform(fig1)
    c = cfg()
    out = forward(t, zero_params(t.x_star.shape[1], 2, c), c).value
    assert out.shape == (5, 2)
    assert (out == 0).all()


def test_forward_is_deterministic(fig1):
    t = graphite_transform(fig1)
    c = cfg(dropout_rate=0.3)
    p = init_params(2, 2, c, seed=3)
    a = forward(t, p, c, train_mode=True, seed=11).value
    b = forward(t, p, c, train_mode=True, seed=11).value
    assert a.tobytes() == b.tobytes()


def test_zero_layers_is_encode_decode(fig1):
    t = graphite_transform(fig1)
    c = cfg(num_layers=0)
    p = init_params(2, 2, c, seed=1)
    want = (t.x_star.toarray() @ p["enc.W"] + p["enc.b"])[:5] @ p["dec.W"] + p["dec.b"]
    np.testing.assert_allclose(forward(t, p, c).value, want, atol=1e-14)


def test_logits_only_for_graph_nodes(fig1):
    t = graphite_transform(fig1)
    c = cfg()
    assert forward(t, init_params(2, 2, c), c).shape == (5, 2)


def test_encoder_width_mismatch(fig1):
    t = graphite_transform(fig1)
    c = cfg()
    with pytest.raises(ValueError):
        forward(t, init_params(3, 2, c), c)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    g = random_small_graph(rng, max_nodes=20)
    perm = rng.permutation(g.num_nodes)
    inv = np.argsort(perm)
    # node i of the permuted graph is node perm[i] of the original
    h = build_graph(inv[g.edges], g.features[perm], g.labels[perm], num_nodes=g.num_nodes,
                    num_classes=g.num_classes, num_features=g.num_features)
    c = cfg()
    t, tp = graphite_transform(g), graphite_transform(h)
    p = init_params(t.x_star.shape[1], g.num_classes, c, seed=seed)
    np.testing.assert_allclose(forward(tp, p, c).value, forward(t, p, c).value[perm], atol=1e-10)


def test_plan_messages_per_node(fig1):
    t = graphite_transform(fig1)
    plan = message_plan(t, cfg())
    # one self message plus one per incident edge
    deg = np.bincount(t.all_edges().ravel(), minlength=t.num_nodes)
    assert np.diff(plan.indptr).tolist() == (deg + 1).tolist()


def test_checkpoint_round_trip(tmp_path, fig1):
    c = cfg()
    p = init_params(2, 2, c, seed=5)
    path = tmp_path / "ckpt.bin"
    save_params(path, p)
    q = load_params(path)
    assert list(q) == list(p)
    for k in p:
        assert q[k].tobytes() == p[k].tobytes()
    assert path.read_bytes()[:8] == b"GRPHCKPT"
    path.write_bytes(b"NOTACKPT" + path.read_bytes()[8:])
    with pytest.raises(ValueError):
        load_params(path)

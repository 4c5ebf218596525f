"""Self-gated, degree-normalized GNN over a transformed graph."""
from __future__ import annotations

import math
import struct
from dataclasses import asdict, dataclass

import numpy as np

from graphite import autodiff as ad
from graphite.transform import TransformedGraph


@dataclass(frozen=True)
class ModelConfig:
    w_x: float = 0.6
    w_0: float = 1.0
    tau: float = 1.0
    num_layers: int = 8
    hidden_dim: int = 512
    dropout_rate: float = 0.2
    w_e: float = 1.0
    mlp_layers_per_block: int = 2

    def __post_init__(self):
        if not (self.w_x > 0 and self.w_0 > 0 and self.tau > 0):
            raise ValueError("w_x, w_0 and tau must be strictly positive")
        if self.w_e != 1.0:
            raise ValueError("graph-edge weight is the reference weight and must be 1")
        if self.hidden_dim < 1 or self.num_layers < 0:
            raise ValueError("hidden_dim must be >= 1 and num_layers >= 0")
        if self.mlp_layers_per_block != 2:
            raise ValueError("each block uses a two-layer MLP")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    def as_dict(self) -> dict:
        return asdict(self)


class Params(dict):
    """Ordered name -> array mapping of every learnable weight."""

    def copy(self) -> Params:
        return Params((k, v.copy()) for k, v in self.items())

    def num_values(self) -> int:
        return sum(v.size for v in self.values())


def init_params(num_inputs: int, num_classes: int, cfg: ModelConfig, seed: int = 0) -> Params:
    """Glorot-uniform weights, zero biases, from a seeded generator."""
    rng = np.random.default_rng(seed)
    m = cfg.hidden_dim

    def glorot(fan_in, fan_out, shape):
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, size=shape)

    p = Params()
    p["enc.W"] = glorot(num_inputs, m, (num_inputs, m))
    p["enc.b"] = np.zeros((1, m))
    for l in range(cfg.num_layers):
        p[f"layer{l}.a"] = glorot(2 * m, 1, (2 * m, 1))
        p[f"layer{l}.b"] = np.zeros((1, 1))
        p[f"layer{l}.W1"] = glorot(m, m, (m, m))
        p[f"layer{l}.b1"] = np.zeros((1, m))
        p[f"layer{l}.W2"] = glorot(m, m, (m, m))
        p[f"layer{l}.b2"] = np.zeros((1, m))
    p["dec.W"] = glorot(m, num_classes, (m, num_classes))
    p["dec.b"] = np.zeros((1, num_classes))
    return p


def zero_params(num_inputs: int, num_classes: int, cfg: ModelConfig) -> Params:
    return Params((k, np.zeros_like(v)) for k, v in init_params(num_inputs, num_classes, cfg).items())


def weighted_degrees(t: TransformedGraph, cfg: ModelConfig) -> np.ndarray:
    """Self-loop weight plus incident edge weights, for every node of ``V*``."""
    n = t.num_graph_nodes
    d = np.full(t.num_nodes, float(cfg.w_0))
    d[:n] += cfg.w_e * t.base.degrees
    if len(t.feature_edges):
        d[:n] += cfg.w_x * np.bincount(t.feature_edges[:, 0], minlength=n)
        d[n:] += cfg.w_x * np.bincount(t.feature_edges[:, 1], minlength=t.num_feature_nodes)
    return d


def gate_score(h_u, h_v, a, b: float, tau: float) -> float:
    h_u = np.asarray(h_u, dtype=np.float64).ravel()
    h_v = np.asarray(h_v, dtype=np.float64).ravel()
    a = np.asarray(a, dtype=np.float64).ravel()
    if h_u.shape != h_v.shape or a.shape[0] != 2 * h_u.shape[0]:
        raise ValueError("gate needs |h_u| = |h_v| = m and |a| = 2m")
    return math.tanh((float(a @ np.concatenate([h_u, h_v])) + b) / tau)


@dataclass(frozen=True)
class MessagePlan:
    """Directed messages of one aggregation, grouped by target (CSR).

    Message ``e`` carries ``coef[e] * alpha(gate_left[e], gate_right[e]) * h[cols[e]]``
    into its target row.
    """

    indptr: np.ndarray
    cols: np.ndarray
    coef: np.ndarray
    gate_left: np.ndarray
    gate_right: np.ndarray
    num_nodes: int


def message_plan(t: TransformedGraph, cfg: ModelConfig) -> MessagePlan:
    n, total = t.num_graph_nodes, t.num_nodes
    d = weighted_degrees(t, cfg)
    rs = 1.0 / np.sqrt(d)
    nodes = np.arange(total, dtype=np.int64)
    ge = t.base.edges
    fe = t.feature_edges
    fv, fx = fe[:, 0], fe[:, 1] + n
    # (target, source, coef, gate_left, gate_right) per message
    tgt = [nodes, ge[:, 0], ge[:, 1], fv, fx]
    src = [nodes, ge[:, 1], ge[:, 0], fx, fv]
    coef = [
        cfg.w_0 / d,
        cfg.w_e * rs[ge[:, 0]] * rs[ge[:, 1]],
        cfg.w_e * rs[ge[:, 1]] * rs[ge[:, 0]],
        cfg.w_x * rs[fv] * rs[fx],
        cfg.w_x * rs[fv] * rs[fx],
    ]
    left = [nodes, ge[:, 0], ge[:, 1], fv, fv]
    right = [nodes, ge[:, 1], ge[:, 0], fx, fx]
    tgt, src, coef, left, right = (np.concatenate(x) for x in (tgt, src, coef, left, right))
    order = np.lexsort((src, tgt))
    indptr = np.zeros(total + 1, dtype=np.int64)
    np.cumsum(np.bincount(tgt, minlength=total), out=indptr[1:])
    return MessagePlan(
        indptr=indptr,
        cols=np.ascontiguousarray(src[order], dtype=np.int64),
        coef=np.ascontiguousarray(coef[order]),
        gate_left=left[order].astype(np.int64),
        gate_right=right[order].astype(np.int64),
        num_nodes=total,
    )


def aggregate_tensor(plan: MessagePlan, h: ad.Tensor, a: ad.Tensor, b: ad.Tensor, tau: float) -> ad.Tensor:
    m = h.shape[1]
    s_left = ad.matmul(h, ad.row_slice(a, 0, m))
    s_right = ad.matmul(h, ad.row_slice(a, m, 2 * m))
    z = ad.add(ad.add(ad.gather_rows(s_left, plan.gate_left), ad.gather_rows(s_right, plan.gate_right)), b)
    alpha = ad.tanh(ad.scale(z, 1.0 / tau))
    w = ad.scale(alpha, plan.coef)
    return ad.edge_spmm(plan.indptr, plan.cols, w, h)


def aggregate(t: TransformedGraph, h: np.ndarray, params: Params, cfg: ModelConfig, layer: int = 0,
              plan: MessagePlan | None = None) -> np.ndarray:
    """One gated aggregation step on plain arrays (no gradient tracking)."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (t.num_nodes, cfg.hidden_dim):
        raise ValueError(f"embeddings must have shape {(t.num_nodes, cfg.hidden_dim)}, got {h.shape}")
    plan = plan or message_plan(t, cfg)
    out = aggregate_tensor(
        plan, ad.constant(h), ad.constant(params[f"layer{layer}.a"]), ad.constant(params[f"layer{layer}.b"]), cfg.tau,
    )
    return out.value


def _dropout_seed(seed, layer: int):
    if seed is None:
        return None
    return [*np.atleast_1d(seed).tolist(), layer]


def forward(t: TransformedGraph, params: Params | dict[str, ad.Tensor], cfg: ModelConfig,
            train_mode: bool = False, seed=0, plan: MessagePlan | None = None) -> ad.Tensor:
    """Logits for the graph nodes of ``t``.

    ``params`` may hold arrays (wrapped as constants) or tensors (for
    training). Dropout masks are drawn from ``seed`` and the layer index.
    """
    p = {k: v if isinstance(v, ad.Tensor) else ad.constant(v) for k, v in params.items()}
    if t.x_star.shape[1] != p["enc.W"].shape[0]:
        raise ValueError(f"encoder expects {p['enc.W'].shape[0]} inputs, x_star has {t.x_star.shape[1]}")
    plan = plan or message_plan(t, cfg)
    h = ad.add(ad.sparse_matmul(t.x_star, p["enc.W"]), p["enc.b"])
    for l in range(cfg.num_layers):
        h = aggregate_tensor(plan, h, p[f"layer{l}.a"], p[f"layer{l}.b"], cfg.tau)
        hidden = ad.gelu(ad.add(ad.matmul(h, p[f"layer{l}.W1"]), p[f"layer{l}.b1"]))
        mlp = ad.add(ad.matmul(hidden, p[f"layer{l}.W2"]), p[f"layer{l}.b2"])
        mlp = ad.dropout(mlp, cfg.dropout_rate, _dropout_seed(seed, l), train=train_mode)
        h = ad.add(h, mlp)
    h_graph = ad.row_slice(h, 0, t.num_graph_nodes)
    return ad.add(ad.matmul(h_graph, p["dec.W"]), p["dec.b"])


# -- checkpoint container ---------------------------------------------------

MAGIC = b"GRPHCKPT"
VERSION = 1


def save_params(path, params: Params) -> None:
    """Write ``params`` in the versioned little-endian container (see README)."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(params)))
        for name, arr in params.items():
            raw = name.encode("utf-8")
            arr = np.asarray(arr, dtype="<f8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(np.ascontiguousarray(arr).tobytes())


def load_params(path) -> Params:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise ValueError("not a parameter checkpoint")
    version, count = struct.unpack_from("<II", data, 8)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    pos = 16
    out = Params()
    for _ in range(count):
        (ln,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos:pos + ln].decode("utf-8")
        pos += ln
        (ndim,) = struct.unpack_from("<B", data, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}Q", data, pos)
        pos += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        out[name] = np.frombuffer(data, dtype="<f8", count=size, offset=pos).reshape(shape).astype(np.float64)
        pos += 8 * size
    if pos != len(data):
        raise ValueError("trailing bytes in checkpoint")
    return out

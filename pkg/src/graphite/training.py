"""Full-graph training with Adam, random splits and evaluation metrics."""
from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata

from graphite import autodiff as ad
from graphite import serialize
from graphite.graph import Graph
from graphite.model import ModelConfig, Params, forward, init_params, message_plan
from graphite.transform import TransformedGraph

RATIOS = {"48/32/20": (0.48, 0.32, 0.20), "60/20/20": (0.60, 0.20, 0.20)}


class TrainingDiverged(FloatingPointError):
    def __init__(self, step: int, loss: float):
        super().__init__(f"loss became {loss} at step {step}")
        self.step = step
        self.loss = loss


@dataclass(frozen=True)
class SplitSpec:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    ratio: tuple[float, float, float]
    seed: int
    replicate: int

    def identity(self) -> str:
        h = hashlib.sha256()
        for part in (self.train, self.val, self.test):
            h.update(np.asarray(part, dtype="<i8").tobytes())
            h.update(b"|")
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-5
    steps: int = 1000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    metric: str = "accuracy"
    eval_every: int = 1

    def __post_init__(self):
        if self.learning_rate < 0 or self.steps < 0:
            raise ValueError("learning rate and step count must be nonnegative")
        if self.metric not in ("accuracy", "roc_auc"):
            raise ValueError(f"unknown metric {self.metric!r}")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


@dataclass
class TrainReport:
    losses: list[float]
    metric: str
    final_train: float
    final_val: float
    final_test: float
    best_val: float
    best_step: int
    best_test: float
    seed: int
    config_hash: str
    split_id: str
    replicate: int = 0
    best_params: Params | None = field(default=None, repr=False)

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("best_params")
        d.pop("losses")
        return d

    def to_lines(self) -> list[str]:
        """Line-delimited JSON: a header, one record per step, a summary."""
        head = {"kind": "header", "seed": self.seed, "config_hash": self.config_hash,
                "split_id": self.split_id, "replicate": self.replicate, "metric": self.metric,
                "steps": len(self.losses)}
        lines = [serialize.dumps(head)]
        lines += [serialize.dumps({"kind": "step", "step": i + 1, "loss": l}) for i, l in enumerate(self.losses)]
        lines.append(serialize.dumps({"kind": "summary", **self.summary()}))
        return lines


def make_splits(g: Graph, ratio=(0.48, 0.32, 0.20), seed: int = 0, replicates: int = 10) -> list[SplitSpec]:
    """Random train/val/test partitions of the labelled nodes, one per replicate."""
    if isinstance(ratio, str):
        ratio = RATIOS[ratio]
    ratio = tuple(float(r) for r in ratio)
    if g.labels is None:
        raise ValueError("splits need labels")
    labelled = np.flatnonzero(g.label_mask)
    n = len(labelled)
    n_train = int(round(ratio[0] * n))
    n_val = int(round(ratio[1] * n))
    if n_train < 1 or n_val < 1 or n - n_train - n_val < 1:
        raise ValueError(f"too few labelled nodes ({n}) for a {ratio} split")
    out = []
    for r in range(replicates):
        perm = np.random.default_rng([seed, r]).permutation(labelled)
        out.append(SplitSpec(
            train=np.sort(perm[:n_train]), val=np.sort(perm[n_train:n_train + n_val]),
            test=np.sort(perm[n_train + n_val:]), ratio=ratio, seed=seed, replicate=r,
        ))
    return out


def adam_step(params: Params, grads: dict, state: AdamState, cfg: TrainConfig) -> tuple[Params, AdamState]:
    """In-place Adam update with bias correction; returns ``(params, state)``."""
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {name} {p.shape}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[name], state.v[name] = m, v
        p -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
    return params, state


def accuracy(logits, labels, index) -> float:
    index = np.asarray(index, dtype=np.int64)
    if len(index) == 0:
        raise ValueError("empty index set")
    pred = np.argmax(np.asarray(logits)[index], axis=1)  # first maximum wins ties
    return float(np.mean(pred == np.asarray(labels)[index]))


def roc_auc(scores, binary_labels, index) -> float:
    """Mann-Whitney AUC with tied scores counted as one half."""
    index = np.asarray(index, dtype=np.int64)
    s = np.asarray(scores, dtype=np.float64)[index]
    y = np.asarray(binary_labels)[index]
    pos = y == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC-AUC needs both classes in the index set")
    ranks = rankdata(s)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def evaluate(logits: np.ndarray, labels: np.ndarray, index, metric: str) -> float:
    if metric == "accuracy":
        return accuracy(logits, labels, index)
    return roc_auc(_softmax(logits)[:, 1], labels, index)


def config_hash(model_cfg: ModelConfig, train_cfg: TrainConfig) -> str:
    text = serialize.dumps({"model": model_cfg.as_dict(), "train": asdict(train_cfg)})
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def train(t: TransformedGraph | Graph, split: SplitSpec, model_cfg: ModelConfig, train_cfg: TrainConfig,
          params: Params | None = None) -> TrainReport:
    """Train on ``split.train``; report the test metric at the best validation step.

    Step 0 (the initial parameters) is a selection candidate, so a run with
    ``steps=0`` reports untrained metrics.
    """
    if isinstance(t, Graph):
        t = TransformedGraph.identity(t)
    g = t.base
    if g.labels is None:
        raise ValueError("training needs graph-node labels")
    labels = g.labels
    seed = train_cfg.seed + split.replicate
    if params is None:
        params = init_params(t.x_star.shape[1], g.num_classes, model_cfg, seed=seed)
    params = params.copy()
    plan = message_plan(t, model_cfg)
    state = AdamState()
    losses: list[float] = []

    def score(p, index):
        logits = forward(t, p, model_cfg, train_mode=False, plan=plan).value
        return evaluate(logits, labels, index, train_cfg.metric), logits

    best_val, _ = score(params, split.val)
    best_step, best_params = 0, params.copy()
    for step in range(1, train_cfg.steps + 1):
        tensors = {k: ad.parameter(v, name=k) for k, v in params.items()}
        logits = forward(t, tensors, model_cfg, train_mode=True, seed=[seed, step], plan=plan)
        loss = ad.softmax_cross_entropy(logits, labels, split.train)
        lv = loss.item()
        if not math.isfinite(lv):
            raise TrainingDiverged(step, lv)
        losses.append(lv)
        ad.backward(loss)
        grads = {k: (tensors[k].grad if tensors[k].grad is not None else np.zeros_like(v)) for k, v in params.items()}
        adam_step(params, grads, state, train_cfg)
        if step % train_cfg.eval_every == 0 or step == train_cfg.steps:
            val, _ = score(params, split.val)
            if val > best_val:
                best_val, best_step, best_params = val, step, params.copy()

    logits = forward(t, params, model_cfg, train_mode=False, plan=plan).value
    best_logits = forward(t, best_params, model_cfg, train_mode=False, plan=plan).value
    m = train_cfg.metric
    return TrainReport(
        losses=losses,
        metric=m,
        final_train=evaluate(logits, labels, split.train, m),
        final_val=evaluate(logits, labels, split.val, m),
        final_test=evaluate(logits, labels, split.test, m),
        best_val=best_val,
        best_step=best_step,
        best_test=evaluate(best_logits, labels, split.test, m),
        seed=seed,
        config_hash=config_hash(model_cfg, train_cfg),
        split_id=split.identity(),
        replicate=split.replicate,
        best_params=best_params,
    )


def worker_count(n_tasks: int) -> int:
    cap = os.environ.get("GRAPHITE_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_tasks))


def _train_job(args):
    return train(*args)


def train_replicates(t, splits: list[SplitSpec], model_cfg: ModelConfig, train_cfg: TrainConfig) -> list[TrainReport]:
    """One training run per split, in a process pool capped by ``GRAPHITE_THREADS``."""
    jobs = [(t, s, model_cfg, train_cfg) for s in splits]
    workers = worker_count(len(jobs))
    if workers == 1:
        reports = [_train_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_train_job, jobs))
    return sorted(reports, key=lambda r: r.replicate)


# model and optimiser settings used for the original-versus-transformed comparison
STANDARD_MODEL = ModelConfig(w_x=0.6, w_0=1.0, tau=1.0, num_layers=2, hidden_dim=32, dropout_rate=0.2)
STANDARD_TRAIN = TrainConfig(learning_rate=0.01, steps=200, seed=0)

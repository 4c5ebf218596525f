"""Central finite-difference check of the model's analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from graphite import autodiff as ad
from graphite.model import ModelConfig, Params, forward, message_plan
from graphite.transform import TransformedGraph

# gradients smaller than this are compared absolutely rather than relatively
GRAD_FLOOR = 1e-4


@dataclass(frozen=True)
class GradCheckResult:
    max_rel_error: float
    worst_param: str
    worst_index: tuple
    num_checked: int


def model_loss(t: TransformedGraph, params, cfg: ModelConfig, mask, seed=0, plan=None) -> ad.Tensor:
    logits = forward(t, params, cfg, train_mode=True, seed=seed, plan=plan)
    return ad.softmax_cross_entropy(logits, t.base.labels, mask)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = GRAD_FLOOR) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)


def check_model_gradients(t: TransformedGraph, params: Params, cfg: ModelConfig, mask,
                          step: float = 1e-6, seed=0) -> GradCheckResult:
    plan = message_plan(t, cfg)
    tensors = {k: ad.parameter(v, name=k) for k, v in params.items()}
    ad.backward(model_loss(t, tensors, cfg, mask, seed, plan))
    worst = (0.0, "", (), 0)
    count = 0
    for name, value in params.items():
        analytic = tensors[name].grad if tensors[name].grad is not None else np.zeros_like(value)
        numeric = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            orig = value[idx]
            value[idx] = orig + step
            up = model_loss(t, params, cfg, mask, seed, plan).item()
            value[idx] = orig - step
            down = model_loss(t, params, cfg, mask, seed, plan).item()
            value[idx] = orig
            numeric[idx] = (up - down) / (2 * step)
        err = relative_error(analytic, numeric)
        count += value.size
        i = np.unravel_index(int(np.argmax(err)), err.shape)
        if err[i] > worst[0]:
            worst = (float(err[i]), name, tuple(int(j) for j in i), 0)
    return GradCheckResult(max_rel_error=worst[0], worst_param=worst[1], worst_index=worst[2], num_checked=count)

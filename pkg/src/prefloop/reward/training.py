"""Ensemble training on preference batches and replay-buffer relabeling."""

from __future__ import annotations

import numpy as np

from prefloop.numcore import (
    adam_step,
    clip_grad_norm,
    mlp_backward,
    mlp_forward_cached,
)
from prefloop.numcore.mlp import grad_arrays, param_arrays
from prefloop.reward.ensemble import (
    RewardEnsemble,
    _log_logistic,
    ensemble_reward_rows,
    segment_return_rows,
    stable_logistic,
)


def _batch_rows(batch) -> np.ndarray:
    return np.concatenate(
        [np.concatenate([d.pair[0].state_action_rows(),
                         d.pair[1].state_action_rows()]) for d in batch],
        axis=0,
    )


def member_preference_grads(member, batch: list):
    """Cross-entropy loss and parameter gradients for one member on a batch."""
    labels = np.array([d.label for d in batch])
    rows = _batch_rows(batch)
    T = len(batch[0].pair[0])
    B = len(batch)
    out, cache = mlp_forward_cached(member, rows)
    returns = out[:, 0].reshape(B, 2, T).sum(axis=2)
    z = returns[:, 1] - returns[:, 0]
    ce = -labels[:, 0] * _log_logistic(-z) - labels[:, 1] * _log_logistic(z)
    dz = (stable_logistic(z) - labels[:, 1]) / B
    per_row = np.repeat((dz[:, None] * np.array([-1.0, 1.0])).reshape(-1), T)
    pg, _ = mlp_backward(member, cache, per_row[:, None])
    return float(np.mean(ce)), grad_arrays(pg)


def train_ensemble(ensemble: RewardEnsemble, dataset: list, steps: int = 200,
                   batch_size: int = 128,
                   rng: np.random.Generator | None = None) -> list[float]:
    """Train every member on identically sampled batches; returns loss trace.

    Batches are drawn with replacement when the dataset is smaller than one
    batch, without replacement otherwise.
    """
    if not dataset:
        raise ValueError("empty preference dataset")
    if rng is None:
        rng = np.random.default_rng(0)
    trace = []
    n = len(dataset)
    for _ in range(steps):
        if n < batch_size:
            sel = rng.integers(0, n, size=batch_size)
        else:
            sel = rng.choice(n, size=batch_size, replace=False)
        batch = [dataset[int(i)] for i in sel]
        step_losses = []
        for member, opt in zip(ensemble.members, ensemble.optimizers):
            loss, grads = member_preference_grads(member, batch)
            step_losses.append(loss)
            clip_grad_norm(grads, 10.0)
            adam_step(opt, param_arrays(member), grads)
        trace.append(float(np.mean(step_losses)))
    return trace


def relabel_buffer(ensemble: RewardEnsemble, buffer) -> int:
    """Rewrite every stored reward with the current ensemble-mean reward."""
    return buffer.relabel_rewards(
        lambda states, actions: ensemble_reward_rows(ensemble, states, actions)
    )


def ranking_accuracy(ensemble: RewardEnsemble, pairs: list, true_returns: list) -> float:
    """Fraction of pairs where ensemble-mean return ordering matches the oracle."""
    if not pairs:
        return float("nan")
    ok = 0
    for (s0, s1), (g0, g1) in zip(pairs, true_returns):
        r0 = segment_return_rows(ensemble, s0)
        r1 = segment_return_rows(ensemble, s1)
        ok += (r0 > r1) == (g0 > g1)
    return ok / len(pairs)

"""Deterministic policy evaluation from a checkpoint."""

from __future__ import annotations

import numpy as np

from prefloop.agent import make_policy
from prefloop.agent.policy import act
from prefloop.envsim import (
    Action,
    HORIZON,
    STATE_DIM,
    make_task,
    reset_state,
    step as env_step,
)
from prefloop.numcore import Mlp, load_checkpoint


def policy_from_checkpoint(path) -> tuple:
    tensors, meta = load_checkpoint(path)
    layers = []
    i = 0
    while f"w{i}" in tensors:
        layers.append((tensors[f"w{i}"], tensors[f"b{i}"]))
        i += 1
    if not layers:
        raise ValueError(f"checkpoint {path} holds no policy layers")
    net = Mlp(layers, hidden_activation="relu", output_activation="identity")
    policy = make_policy(STATE_DIM, layers[-1][0].shape[0] // 2, hidden=())
    policy.net = net
    return policy, meta


def evaluate_policy(policy, task, episodes: int, seed: int = 0) -> dict:
    """Run deterministic episodes; success means ending the episode at the goal."""
    rng = np.random.default_rng(seed)
    successes = 0
    returns = []
    for _ in range(episodes):
        state = reset_state(task, rng)
        total = 0.0
        for _ in range(HORIZON):
            action = act(policy, state.to_vector(), deterministic=True)
            nxt, done = env_step(state, Action(action), task)
            total += task.true_progress(nxt) - task.true_progress(state)
            if task.is_success(nxt):
                total += 1.0
            state = nxt
            if done:
                break
        successes += task.is_success(state)
        returns.append(total)
    return {
        "episodes": episodes,
        "success_rate": successes / episodes,
        "true_return_mean": float(np.mean(returns)),
    }


def evaluate_checkpoint(path, episodes: int, seed: int = 0) -> dict:
    policy, meta = policy_from_checkpoint(path)
    task = make_task(meta.get("task", "reach"))
    result = evaluate_policy(policy, task, episodes, seed=seed)
    result["task"] = task.task_id
    return result

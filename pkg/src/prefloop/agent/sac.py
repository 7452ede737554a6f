"""One-step SAC update: clipped double-Q targets, reparameterized policy step.

Gradients are assembled by hand. The policy gradient flows through the
sampled action (tanh of mean + std * xi with xi fixed) into the minimum of
the two critics, and through the entropy term's explicit dependence on mean
and log-std.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from prefloop.agent.critic import TwinCritics, soft_update
from prefloop.agent.policy import (
    GaussianPolicy,
    head_upstream,
    logprob_grads,
    sample_with_logprob,
)
from prefloop.numcore import (
    AdamState,
    adam_init,
    adam_step,
    clip_grad_norm,
    mlp_backward,
    mlp_forward_cached,
    param_arrays,
)
from prefloop.numcore.mlp import grad_arrays


@dataclass
class SacConfig:
    discount: float = 0.99
    entropy_coef: float = 0.1
    learning_rate: float = 1e-4
    tau: float = 0.005


@dataclass
class SacOptimizers:
    policy: AdamState
    q1: AdamState
    q2: AdamState


def make_optimizers(policy: GaussianPolicy, critics: TwinCritics,
                    learning_rate: float) -> SacOptimizers:
    return SacOptimizers(
        policy=adam_init(param_arrays(policy.net), learning_rate=learning_rate),
        q1=adam_init(param_arrays(critics.q1), learning_rate=learning_rate),
        q2=adam_init(param_arrays(critics.q2), learning_rate=learning_rate),
    )


def critic_loss(critic, states: np.ndarray, actions: np.ndarray,
                targets: np.ndarray):
    """MSE to fixed targets; returns (loss, param grads, input grads)."""
    x = np.concatenate([states, actions], axis=1)
    out, cache = mlp_forward_cached(critic, x)
    err = out[:, 0] - targets
    loss = float(np.mean(err * err))
    upstream = (2.0 / len(err)) * err[:, None]
    pg, gin = mlp_backward(critic, cache, upstream)
    return loss, grad_arrays(pg), gin


def sac_update(policy: GaussianPolicy, critics: TwinCritics,
               opts: SacOptimizers, batch: dict, cfg: SacConfig,
               rng: np.random.Generator) -> dict:
    """One TD step on both critics, one policy step, one soft target update."""
    states = np.atleast_2d(batch["states"])
    actions = np.atleast_2d(batch["actions"])
    rewards = np.asarray(batch["rewards"], dtype=np.float64)
    next_states = np.atleast_2d(batch["next_states"])
    if len(states) < 2:
        raise ValueError("SAC update needs a batch of at least 2 transitions")

    # --- critic targets (episodes end only by time limit, so always bootstrap)
    next_sample = sample_with_logprob(policy, next_states, rng)
    q1t, q2t = critics.q_rows(next_states, next_sample["actions"], target=True)
    targets = rewards + cfg.discount * (
        np.minimum(q1t, q2t) - cfg.entropy_coef * next_sample["log_prob"]
    )

    loss1, g1, _ = critic_loss(critics.q1, states, actions, targets)
    clip_grad_norm(g1, 10.0)
    adam_step(opts.q1, param_arrays(critics.q1), g1)
    loss2, g2, _ = critic_loss(critics.q2, states, actions, targets)
    clip_grad_norm(g2, 10.0)
    adam_step(opts.q2, param_arrays(critics.q2), g2)

    # --- policy step through fresh reparameterized actions
    sample = sample_with_logprob(policy, states, rng)
    a_new = sample["actions"]
    x = np.concatenate([states, a_new], axis=1)
    out1, cache1 = mlp_forward_cached(critics.q1, x)
    out2, cache2 = mlp_forward_cached(critics.q2, x)
    q1v, q2v = out1[:, 0], out2[:, 0]
    q_min = np.minimum(q1v, q2v)
    B = len(states)
    policy_loss = float(np.mean(cfg.entropy_coef * sample["log_prob"] - q_min))

    # dL/da: pick the active critic per row, take input grads on the action slice
    pick1 = (q1v <= q2v)[:, None]
    up1 = np.where(pick1, -1.0 / B, 0.0)
    up2 = np.where(pick1, 0.0, -1.0 / B)
    _, gin1 = mlp_backward(critics.q1, cache1, up1)
    _, gin2 = mlp_backward(critics.q2, cache2, up2)
    ds = states.shape[1]
    dL_da = gin1[:, ds:] + gin2[:, ds:]

    dlogp_dmean, dlogp_dlogstd = logprob_grads(sample)
    da_du = 1.0 - a_new * a_new
    q_mean = dL_da * da_du                       # dL/dmean via the action path
    q_logstd = q_mean * sample["std"] * sample["xi"]
    g_mean = cfg.entropy_coef / B * dlogp_dmean + q_mean
    g_logstd = cfg.entropy_coef / B * dlogp_dlogstd + q_logstd
    upstream = head_upstream(policy, sample, g_mean, g_logstd)
    pg, _ = mlp_backward(policy.net, sample["cache"], upstream)
    grads = grad_arrays(pg)
    clip_grad_norm(grads, 10.0)
    adam_step(opts.policy, param_arrays(policy.net), grads)

    soft_update(critics, cfg.tau)

    return {
        "critic_loss": 0.5 * (loss1 + loss2),
        "policy_loss": policy_loss,
        "mean_q": float(np.mean(q_min)),
        "mean_log_prob": float(np.mean(sample["log_prob"])),
    }

"""Tanh-squashed Gaussian policy.

The network outputs per-dimension mean and raw log-std; the log-std is
hard-clamped to [LOG_STD_MIN, LOG_STD_MAX] (zero gradient outside). Sampled
actions are tanh(mean + std * xi), so they always stay inside [-1, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from prefloop.numcore import Mlp, mlp_forward, mlp_forward_cached, mlp_init

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
_SQUASH_EPS = 1e-6
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class GaussianPolicy:
    net: Mlp  # state -> concat(mean, raw log-std)
    action_dim: int


def make_policy(state_dim: int, action_dim: int = 2,
                hidden: tuple[int, ...] = (256, 256, 256),
                rng: np.random.Generator | None = None) -> GaussianPolicy:
    net = mlp_init([state_dim, *hidden, 2 * action_dim],
                   hidden_activation="relu", output_activation="identity",
                   rng=rng)
    return GaussianPolicy(net=net, action_dim=action_dim)


def _split_head(policy: GaussianPolicy, out: np.ndarray):
    mean = out[..., : policy.action_dim]
    log_std = np.clip(out[..., policy.action_dim:], LOG_STD_MIN, LOG_STD_MAX)
    return mean, log_std


def act(policy: GaussianPolicy, state: np.ndarray, deterministic: bool,
        rng: np.random.Generator | None = None) -> np.ndarray:
    """Single action for one state; stochastic mode needs an rng."""
    out = mlp_forward(policy.net, np.asarray(state, dtype=np.float64))
    mean, log_std = _split_head(policy, out)
    if deterministic:
        return np.tanh(mean)
    xi = rng.standard_normal(policy.action_dim)
    return np.tanh(mean + np.exp(log_std) * xi)


def sample_with_logprob(policy: GaussianPolicy, states: np.ndarray,
                        rng: np.random.Generator):
    """Batch sample actions plus log-probabilities and reparam bookkeeping.

    Returns a dict with actions, per-row log_prob, and the intermediates
    (cache, xi, pre-squash u, mean/log_std, clamp mask) that the SAC update
    needs to push gradients back through the sample.
    """
    states = np.atleast_2d(np.asarray(states, dtype=np.float64))
    out, cache = mlp_forward_cached(policy.net, states)
    raw_log_std = out[:, policy.action_dim:]
    mean, log_std = _split_head(policy, out)
    clamp_active = (raw_log_std <= LOG_STD_MIN) | (raw_log_std >= LOG_STD_MAX)
    std = np.exp(log_std)
    xi = rng.standard_normal(mean.shape)
    u = mean + std * xi
    actions = np.tanh(u)
    log_prob = (
        -0.5 * (xi**2) - log_std - 0.5 * _LOG_2PI
        - np.log(1.0 - actions**2 + _SQUASH_EPS)
    ).sum(axis=1)
    return {
        "actions": actions,
        "log_prob": log_prob,
        "cache": cache,
        "xi": xi,
        "u": u,
        "mean": mean,
        "log_std": log_std,
        "std": std,
        "clamp_active": clamp_active,
    }


def logprob_grads(sample: dict):
    """d log_prob / d mean and d log_prob / d log_std, per row and dimension.

    Derivation through the reparameterized sample with xi held fixed:
    the squash correction contributes +2*tanh(u)*(1-tanh(u)^2)/(1-tanh(u)^2+eps)
    per unit of u; the -log_std term contributes -1 directly.
    """
    a = sample["actions"]
    one_minus_a2 = 1.0 - a * a
    dlogp_du = 2.0 * a * one_minus_a2 / (one_minus_a2 + _SQUASH_EPS)
    du_dlogstd = sample["std"] * sample["xi"]
    dlogp_dmean = dlogp_du
    dlogp_dlogstd = -1.0 + dlogp_du * du_dlogstd
    return dlogp_dmean, dlogp_dlogstd


def head_upstream(policy: GaussianPolicy, sample: dict, g_mean: np.ndarray,
                  g_log_std: np.ndarray) -> np.ndarray:
    """Assemble upstream gradient for the policy net output layer.

    The log-std half is zeroed where the hard clamp was active.
    """
    g = np.concatenate([g_mean, np.where(sample["clamp_active"], 0.0, g_log_std)],
                       axis=1)
    return g

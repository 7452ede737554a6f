"""Twin Q-networks with polyak-averaged target copies."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from prefloop.numcore import Mlp, mlp_forward, mlp_init, param_arrays


@dataclass
class TwinCritics:
    q1: Mlp
    q2: Mlp
    target_q1: Mlp
    target_q2: Mlp
    tau: float = 0.005

    def q_rows(self, states: np.ndarray, actions: np.ndarray,
               target: bool = False) -> tuple[np.ndarray, np.ndarray]:
        x = np.concatenate([states, actions], axis=1)
        nets = (self.target_q1, self.target_q2) if target else (self.q1, self.q2)
        return mlp_forward(nets[0], x)[:, 0], mlp_forward(nets[1], x)[:, 0]


def make_critics(state_dim: int, action_dim: int = 2,
                 hidden: tuple[int, ...] = (256, 256, 256), tau: float = 0.005,
                 rng: np.random.Generator | None = None) -> TwinCritics:
    if rng is None:
        rng = np.random.default_rng(0)
    q1 = mlp_init([state_dim + action_dim, *hidden, 1], rng=rng)
    q2 = mlp_init([state_dim + action_dim, *hidden, 1], rng=rng)
    return TwinCritics(q1=q1, q2=q2, target_q1=copy.deepcopy(q1),
                       target_q2=copy.deepcopy(q2), tau=tau)


def soft_update(critics: TwinCritics, tau: float | None = None):
    """target <- (1 - tau) * target + tau * online, exactly, per tensor."""
    t = critics.tau if tau is None else tau
    for online, target in ((critics.q1, critics.target_q1),
                           (critics.q2, critics.target_q2)):
        for p_on, p_tg in zip(param_arrays(online), param_arrays(target)):
            p_tg *= 1.0 - t
            p_tg += t * p_on

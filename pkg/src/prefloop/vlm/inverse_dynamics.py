"""Action prediction from consecutive adapted image embeddings."""

from __future__ import annotations

import numpy as np

from prefloop.numcore import Mlp, mlp_forward, mlp_init
from prefloop.vlm.adapters import Adapters
from prefloop.vlm.encoders import EMBED_DIM, FrozenEncoders

INVERSE_HIDDEN = 64


def make_inverse_head(rng: np.random.Generator, embed_dim: int = EMBED_DIM,
                      action_dim: int = 2) -> Mlp:
    return mlp_init([2 * embed_dim, INVERSE_HIDDEN, action_dim],
                    hidden_activation="relu", output_activation="identity",
                    rng=rng)


def predict_actions(adapters: Adapters, head: Mlp, img_embed: np.ndarray,
                    next_img_embed: np.ndarray) -> np.ndarray:
    """Predicted actions from raw (frozen-encoder) embedding pairs."""
    x = mlp_forward(adapters.image, np.atleast_2d(img_embed))
    x_next = mlp_forward(adapters.image, np.atleast_2d(next_img_embed))
    return mlp_forward(head, np.concatenate([x, x_next], axis=1))


def inverse_dynamics_loss(encoders: FrozenEncoders, adapters: Adapters, head: Mlp,
                          observation: np.ndarray, next_observation: np.ndarray,
                          action: np.ndarray) -> float:
    """Squared prediction error for one transition (or mean over a batch)."""
    e = encoders.encode_image_rows(observation)
    e_next = encoders.encode_image_rows(next_observation)
    pred = predict_actions(adapters, head, e, e_next)
    actions = np.atleast_2d(np.asarray(action, dtype=np.float64))
    if pred.shape != actions.shape:
        raise ValueError(f"action shape {actions.shape} != prediction {pred.shape}")
    per_transition = np.sum((pred - actions) ** 2, axis=1)
    return float(np.mean(per_transition))

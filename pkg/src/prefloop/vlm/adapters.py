"""Trainable adapter heads over the frozen encoders and the cosine rewards."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from prefloop.numcore import Mlp, identity_mlp, mlp_forward
from prefloop.vlm.encoders import EMBED_DIM, DegenerateEmbeddingError, FrozenEncoders

LANGUAGE_HIDDEN = 256
IMAGE_HIDDEN = 64


@dataclass
class Adapters:
    language: Mlp  # embed_dim -> 256 -> embed_dim
    image: Mlp     # embed_dim -> 64 -> embed_dim

    def snapshot(self) -> "Adapters":
        """Immutable copy published to annotators between fine-tune sessions."""
        return copy.deepcopy(self)


def init_adapters(rng: np.random.Generator, embed_dim: int = EMBED_DIM,
                  jitter: float = 0.01) -> Adapters:
    """Near-identity start so the adapted reward begins at the base reward."""
    return Adapters(
        language=identity_mlp(embed_dim, LANGUAGE_HIDDEN, rng=rng, jitter=jitter),
        image=identity_mlp(embed_dim, IMAGE_HIDDEN, rng=rng, jitter=jitter),
    )


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu < 1e-12 or nv < 1e-12:
        raise DegenerateEmbeddingError("zero-norm embedding in cosine similarity")
    return float(np.dot(u, v) / (nu * nv))


def _cosine_rows(u: np.ndarray, vs: np.ndarray) -> np.ndarray:
    nu = float(np.linalg.norm(u))
    nv = np.linalg.norm(vs, axis=1)
    if nu < 1e-12 or np.any(nv < 1e-12):
        raise DegenerateEmbeddingError("zero-norm embedding in cosine similarity")
    return (vs @ u) / (nu * nv)


def base_reward(encoders: FrozenEncoders, language_token: int,
                observation: np.ndarray) -> float:
    return cosine(encoders.encode_language(language_token),
                  encoders.encode_image(observation))


def adapted_reward(encoders: FrozenEncoders, adapters: Adapters,
                   language_token: int, observation: np.ndarray) -> float:
    u = mlp_forward(adapters.language, encoders.encode_language(language_token))
    v = mlp_forward(adapters.image, encoders.encode_image(observation))
    return cosine(u, v)


def reward_rows(encoders: FrozenEncoders, adapters: Adapters | None,
                language_token: int, observations: np.ndarray) -> np.ndarray:
    """Per-step rewards for a stack of observations (adapters None = base)."""
    e_lang = encoders.encode_language(language_token)
    e_img = encoders.encode_image_rows(observations)
    if adapters is None:
        return _cosine_rows(e_lang, e_img)
    u = mlp_forward(adapters.language, e_lang)
    v = mlp_forward(adapters.image, e_img)
    return _cosine_rows(u, v)


def segment_return(encoders: FrozenEncoders, adapters: Adapters | None,
                   language_token: int, observations: np.ndarray) -> float:
    observations = np.atleast_2d(np.asarray(observations, dtype=np.float64))
    if observations.shape[0] == 0:
        raise ValueError("empty observation sequence")
    return float(np.sum(reward_rows(encoders, adapters, language_token,
                                    observations)))

"""Frozen encoder pair with an injected, recoverable domain gap.

The language side maps each task token to the clean image embedding of a
success exemplar for that task, so that the clean cosine between a language
embedding and an image embedding tracks task progress. The image side applies
the same clean projection and then corrupts it with a fixed rotation,
per-dimension bias and per-call additive noise; adapters have to undo the
corruption to recover the signal.
"""

from __future__ import annotations

import hashlib

import numpy as np

from prefloop.envsim.dynamics import CONTACT_RADIUS, EnvState
from prefloop.envsim.render import OBS_DIM

EMBED_DIM = 64


class DegenerateEmbeddingError(ValueError):
    """An embedding had (near-)zero norm, so cosine similarity is undefined."""


def _success_exemplar(task) -> EnvState:
    if task.has_object:
        agent = task.goal_pos - np.array([CONTACT_RADIUS * 0.7, 0.0])
        obj = task.goal_pos.copy()
    else:
        agent = task.goal_pos.copy()
        obj = np.zeros(2)
    return EnvState(agent_pos=agent, agent_vel=np.zeros(2), object_pos=obj,
                    goal_pos=task.goal_pos.copy(), t=0)


def _blended_rotation(dim: int, strength: float, rng: np.random.Generator) -> np.ndarray:
    """Orthogonal matrix interpolated between identity (0) and fully random (1)."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    m = (1.0 - strength) * np.eye(dim) + strength * q
    u, _, vt = np.linalg.svd(m)
    return u @ vt


class FrozenEncoders:
    """Never updated after construction; corruption is fixed per seed."""

    def __init__(self, tasks, renderer, seed: int, embed_dim: int = EMBED_DIM,
                 gap_strength: float = 0.7, gap_bias_scale: float = 0.1,
                 noise_scale: float = 0.05):
        rng = np.random.default_rng(seed)
        self.embed_dim = embed_dim
        self.noise_scale = noise_scale
        self.projection = rng.normal(0.0, 1.0 / np.sqrt(OBS_DIM),
                                     size=(embed_dim, OBS_DIM))
        self.projection_bias = rng.normal(0.0, 0.1, size=embed_dim)
        self.gap_rotation = _blended_rotation(embed_dim, gap_strength, rng)
        self.gap_bias = rng.normal(0.0, gap_bias_scale, size=embed_dim)
        self._noise_rng = np.random.default_rng(rng.integers(2**63))
        self.language_table = {
            task.language_token: self.clean_embed_rows(
                renderer.observe(_success_exemplar(task))
            )[0]
            for task in tasks
        }

    def clean_embed_rows(self, observations: np.ndarray) -> np.ndarray:
        """Pre-gap image embedding; the target the adapters should recover."""
        obs = np.atleast_2d(np.asarray(observations, dtype=np.float64))
        return np.tanh(obs @ self.projection.T + self.projection_bias)

    def encode_image_rows(self, observations: np.ndarray) -> np.ndarray:
        clean = self.clean_embed_rows(observations)
        noise = self._noise_rng.standard_normal(clean.shape)
        return clean @ self.gap_rotation.T + self.gap_bias + self.noise_scale * noise

    def encode_image(self, observation: np.ndarray) -> np.ndarray:
        return self.encode_image_rows(observation)[0]

    def encode_language(self, language_token: int) -> np.ndarray:
        if language_token not in self.language_table:
            raise KeyError(f"unknown language token {language_token}")
        return self.language_table[language_token].copy()

    def frozen_checksum(self) -> str:
        """Digest of every frozen parameter; must survive any fine-tuning."""
        h = hashlib.sha256()
        for arr in (self.projection, self.projection_bias, self.gap_rotation,
                    self.gap_bias):
            h.update(np.ascontiguousarray(arr).tobytes())
        for token in sorted(self.language_table):
            h.update(np.ascontiguousarray(self.language_table[token]).tobytes())
        return h.hexdigest()

"""Particle-based state-entropy bonus for the unsupervised phase."""

from __future__ import annotations

import logging

import numpy as np

logger = logging.getLogger(__name__)

DISTANCE_FLOOR = 1e-6


class IntrinsicRewardEstimator:
    """Reward = running-std-normalized log distance to the k-th nearest state."""

    def __init__(self, k: int = 5, reference_size: int = 512):
        if k < 1:
            raise ValueError("k must be >= 1")
        self.k = k
        self.reference_size = reference_size
        self._count = 0
        self._mean = 0.0
        self._m2 = 0.0

    def _std(self) -> float:
        if self._count < 2:
            return 1.0
        return max(np.sqrt(self._m2 / self._count), 1e-6)

    def _update_running(self, values: np.ndarray):
        for v in values:
            self._count += 1
            delta = v - self._mean
            self._mean += delta / self._count
            self._m2 += delta * (v - self._mean)

    def raw_rewards(self, states: np.ndarray, references: np.ndarray) -> np.ndarray:
        """log of the k-th NN distance, floored; no normalization."""
        states = np.atleast_2d(states)
        references = np.atleast_2d(references)
        k = self.k
        if len(references) < k:
            logger.warning(
                "only %d reference states for k=%d; using all of them",
                len(references), k,
            )
            k = len(references)
        d2 = (
            np.sum(states**2, axis=1)[:, None]
            + np.sum(references**2, axis=1)[None, :]
            - 2.0 * states @ references.T
        )
        d2 = np.maximum(d2, 0.0)
        kth = np.sort(d2, axis=1)[:, k - 1]
        return np.log(np.maximum(np.sqrt(kth), DISTANCE_FLOOR))

    def compute(self, states: np.ndarray, buffer, rng: np.random.Generator) -> np.ndarray:
        """Normalized intrinsic rewards using a sampled reference set."""
        references = buffer.sample_states(self.reference_size, rng)
        raw = self.raw_rewards(states, references)
        norm = raw / self._std()
        self._update_running(raw)
        return norm

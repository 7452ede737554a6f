"""Feature-vector observation rendering.

Plays the role of the camera: a fixed seeded random nonlinear map from the
canonical state vector (time index excluded) to OBS_DIM features. The same
renderer seed is shared across tasks so that image-side encoders and adapters
transfer between them.
"""

from __future__ import annotations

import numpy as np

from prefloop.envsim.dynamics import STATE_DIM

OBS_DIM = 32

# fixed "camera" seed; independent of the run seed by design
DEFAULT_RENDER_SEED = 7


class ObservationRenderer:
    def __init__(self, seed: int = DEFAULT_RENDER_SEED, obs_dim: int = OBS_DIM,
                 state_dim: int = STATE_DIM):
        rng = np.random.default_rng(seed)
        self.obs_dim = obs_dim
        self.state_dim = state_dim
        self.weight = rng.normal(0.0, 0.8, size=(obs_dim, state_dim))
        self.bias = rng.normal(0.0, 0.2, size=obs_dim)

    def observe_rows(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        return np.tanh(states @ self.weight.T + self.bias)

    def observe(self, state) -> np.ndarray:
        vec = state.to_vector() if hasattr(state, "to_vector") else state
        return self.observe_rows(vec)[0]

    def lipschitz_bound(self) -> float:
        """Upper bound on the feature change per unit state change (tanh' <= 1)."""
        return float(np.linalg.norm(self.weight, ord=2))

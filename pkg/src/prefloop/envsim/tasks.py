"""Task definitions: goals, success predicates and hidden progress functions.

Progress is computed from canonical state vectors (see dynamics.STATE_DIM)
and is vectorized over rows so teachers and metrics can score whole segments
at once. It saturates at 1.0 inside the success radius so that success always
means progress is at the attainable maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from prefloop.envsim.dynamics import CONTACT_RADIUS

TASK_IDS = ("reach", "push")

_ARENA_DIAMETER = 2.0 * math.sqrt(2.0)

# integer ids standing in for the task description strings
LANGUAGE_TOKENS = {"reach": 1, "push": 2}

_GOALS = {"reach": np.array([0.6, 0.6]), "push": np.array([0.5, 0.5])}


def _closeness(dist: np.ndarray, radius: float) -> np.ndarray:
    # 1 inside `radius`, decaying linearly to 0 at the arena diameter
    return 1.0 - np.maximum(0.0, dist - radius) / (_ARENA_DIAMETER - radius)


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    language_token: int
    goal_pos: np.ndarray
    success_radius: float = 0.15
    has_object: bool = False

    def progress_rows(self, states: np.ndarray) -> np.ndarray:
        """true_progress in [0, 1] for each row of canonical state vectors."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        agent = states[:, 0:2]
        obj = states[:, 4:6]
        goal = states[:, 6:8]
        if self.has_object:
            d_ao = np.linalg.norm(agent - obj, axis=1)
            d_og = np.linalg.norm(obj - goal, axis=1)
            staged = 0.5 * _closeness(d_ao, CONTACT_RADIUS) + 0.5 * _closeness(
                d_og, self.success_radius
            )
            return np.where(d_og < self.success_radius, 1.0, np.minimum(staged, 1.0))
        d_ag = np.linalg.norm(agent - goal, axis=1)
        return _closeness(d_ag, self.success_radius)

    def success_rows(self, states: np.ndarray) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        mover = states[:, 4:6] if self.has_object else states[:, 0:2]
        dist = np.linalg.norm(mover - states[:, 6:8], axis=1)
        return dist < self.success_radius

    def true_progress(self, state) -> float:
        vec = state.to_vector() if hasattr(state, "to_vector") else state
        return float(self.progress_rows(vec)[0])

    def is_success(self, state) -> bool:
        vec = state.to_vector() if hasattr(state, "to_vector") else state
        return bool(self.success_rows(vec)[0])


def make_task(task_id: str, success_radius: float = 0.15) -> TaskSpec:
    if task_id not in TASK_IDS:
        raise ValueError(f"unknown task {task_id!r}; expected one of {TASK_IDS}")
    return TaskSpec(
        task_id=task_id,
        language_token=LANGUAGE_TOKENS[task_id],
        goal_pos=_GOALS[task_id].copy(),
        success_radius=success_radius,
        has_object=(task_id == "push"),
    )

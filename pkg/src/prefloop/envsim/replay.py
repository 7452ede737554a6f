"""Transition ring buffer with segment-window sampling.

Stored rewards are refreshed in place by relabeling; every other field is
immutable once written, which the checksum helper makes testable. Segment
windows are contiguous runs inside a single episode.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from prefloop.envsim.dynamics import STATE_DIM
from prefloop.envsim.render import OBS_DIM


class NotEnoughExperienceError(RuntimeError):
    """The buffer does not yet contain enough disjoint segment windows."""


@dataclass
class Segment:
    """Fixed-length window of (state, action, observation) with successors."""

    states: np.ndarray        # (T, state_dim)
    actions: np.ndarray       # (T, action_dim)
    observations: np.ndarray  # (T, obs_dim)
    next_states: np.ndarray   # (T, state_dim)
    episode_id: int
    start_index: int

    def __len__(self) -> int:
        return self.states.shape[0]

    def state_action_rows(self) -> np.ndarray:
        return np.concatenate([self.states, self.actions], axis=1)

    def key(self) -> tuple[int, int]:
        return (self.episode_id, self.start_index)


class ReplayBuffer:
    def __init__(self, capacity: int = 100_000, state_dim: int = STATE_DIM,
                 action_dim: int = 2, obs_dim: int = OBS_DIM):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.next_states = np.zeros((capacity, state_dim))
        self.rewards = np.zeros(capacity)
        self.observations = np.zeros((capacity, obs_dim))
        self.episode_ids = np.full(capacity, -1, dtype=np.int64)
        self.step_in_episode = np.full(capacity, -1, dtype=np.int64)
        self.size = 0
        self.pointer = 0

    def add(self, state, action, next_state, reward, observation,
            episode_id: int, step_index: int):
        i = self.pointer
        self.states[i] = state
        self.actions[i] = action
        self.next_states[i] = next_state
        self.rewards[i] = reward
        self.observations[i] = observation
        self.episode_ids[i] = episode_id
        self.step_in_episode[i] = step_index
        self.pointer = (self.pointer + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def __len__(self) -> int:
        return self.size

    def valid_window_starts(self, length: int) -> np.ndarray:
        """Ring indices where a full in-episode window of ``length`` begins."""
        if self.size < length:
            return np.zeros(0, dtype=np.int64)
        idx = np.arange(self.size if self.size < self.capacity else self.capacity)
        last = (idx + length - 1) % self.capacity
        ok = (
            (self.episode_ids[idx] >= 0)
            & (self.episode_ids[last] == self.episode_ids[idx])
            & (self.step_in_episode[last] == self.step_in_episode[idx] + length - 1)
        )
        if self.size == self.capacity:
            # windows that wrap across the write pointer mix old and new data
            start_rel = (idx - self.pointer) % self.capacity
            ok &= start_rel + length <= self.capacity
        else:
            ok &= idx + length <= self.size
        return idx[ok]

    def segment(self, start: int, length: int) -> Segment:
        sel = (np.arange(length) + start) % self.capacity
        return Segment(
            states=self.states[sel].copy(),
            actions=self.actions[sel].copy(),
            observations=self.observations[sel].copy(),
            next_states=self.next_states[sel].copy(),
            episode_id=int(self.episode_ids[start]),
            start_index=int(self.step_in_episode[start]),
        )

    def relabel_rewards(self, reward_fn) -> int:
        """Replace every stored reward with reward_fn(states, actions)."""
        if self.size == 0:
            return 0
        sel = np.arange(self.size)
        self.rewards[sel] = reward_fn(self.states[sel], self.actions[sel])
        return int(self.size)

    def sample_transitions(self, batch_size: int, rng: np.random.Generator) -> dict:
        if self.size == 0:
            raise NotEnoughExperienceError("replay buffer is empty")
        sel = rng.integers(0, self.size, size=batch_size)
        return {
            "states": self.states[sel],
            "actions": self.actions[sel],
            "next_states": self.next_states[sel],
            "rewards": self.rewards[sel],
            "observations": self.observations[sel],
            "next_observations": None,
        }

    def sample_observation_transitions(self, batch_size: int,
                                       rng: np.random.Generator) -> dict:
        """Transitions with both endpoint observations, for inverse dynamics."""
        starts = self.valid_window_starts(2)
        if starts.size == 0:
            raise NotEnoughExperienceError("no consecutive observation pairs yet")
        sel = starts[rng.integers(0, starts.size, size=batch_size)]
        nxt = (sel + 1) % self.capacity
        return {
            "observations": self.observations[sel],
            "next_observations": self.observations[nxt],
            "actions": self.actions[sel],
        }

    def sample_states(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.size == 0:
            raise NotEnoughExperienceError("replay buffer is empty")
        sel = rng.integers(0, self.size, size=min(n, self.size))
        return self.states[sel]

    def immutable_checksum(self) -> str:
        """Digest over everything except the reward column."""
        h = hashlib.sha256()
        for arr in (self.states, self.actions, self.next_states,
                    self.observations, self.episode_ids, self.step_in_episode):
            h.update(arr[: self.size].tobytes())
        return h.hexdigest()


def sample_segment_pairs(buffer: ReplayBuffer, n: int, length: int,
                         rng: np.random.Generator) -> list[tuple[Segment, Segment]]:
    """Draw n pairs of segments uniformly over valid windows, distinct per pair."""
    if n == 0:
        return []
    starts = buffer.valid_window_starts(length)
    if starts.size < 2:
        raise NotEnoughExperienceError(
            f"need at least 2 windows of length {length}, have {starts.size}"
        )
    pairs = []
    for _ in range(n):
        a, b = rng.choice(starts.size, size=2, replace=False)
        pairs.append((buffer.segment(int(starts[a]), length),
                      buffer.segment(int(starts[b]), length)))
    return pairs


def ground_truth_return(segment: Segment, task) -> float:
    """Teacher-only score: telescoped progress delta plus success bonuses."""
    p_cur = task.progress_rows(segment.states)
    p_next = task.progress_rows(segment.next_states)
    bonus = task.success_rows(segment.next_states).astype(np.float64)
    return float(np.sum(p_next - p_cur) + np.sum(bonus))

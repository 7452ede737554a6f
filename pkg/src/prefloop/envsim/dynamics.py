"""Point-mass dynamics on the [-1, 1]^2 arena.

Semi-implicit Euler: velocity updates first, position moves with the new
velocity. The push task uses a stick-contact rule: while the agent is within
CONTACT_RADIUS of the object, the object translates by the agent's
displacement.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

ARENA_MIN = -1.0
ARENA_MAX = 1.0
DT = 0.1
FRICTION = 0.05
V_MAX = 1.0
CONTACT_RADIUS = 0.1
HORIZON = 200

# canonical state vector: agent_pos(2), agent_vel(2), object_pos(2), goal_pos(2)
STATE_DIM = 8


@dataclass(frozen=True)
class Action:
    force: np.ndarray

    def clipped(self) -> np.ndarray:
        return np.clip(np.asarray(self.force, dtype=np.float64), -1.0, 1.0)


@dataclass(frozen=True)
class EnvState:
    agent_pos: np.ndarray
    agent_vel: np.ndarray
    object_pos: np.ndarray  # zeros when the task has no object
    goal_pos: np.ndarray
    t: int = 0

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.agent_pos, self.agent_vel, self.object_pos, self.goal_pos]
        )

    @staticmethod
    def from_vector(vec: np.ndarray, t: int = 0) -> "EnvState":
        vec = np.asarray(vec, dtype=np.float64)
        return EnvState(
            agent_pos=vec[0:2].copy(),
            agent_vel=vec[2:4].copy(),
            object_pos=vec[4:6].copy(),
            goal_pos=vec[6:8].copy(),
            t=t,
        )


def _clamp_arena(pos: np.ndarray) -> np.ndarray:
    return np.clip(pos, ARENA_MIN, ARENA_MAX)


def _clamp_speed(vel: np.ndarray) -> np.ndarray:
    speed = float(np.linalg.norm(vel))
    if speed > V_MAX:
        return vel * (V_MAX / speed)
    return vel


def step(state: EnvState, action: Action, task) -> tuple[EnvState, bool]:
    """Advance one timestep; done only when the fixed horizon is reached."""
    force = action.clipped()
    vel = _clamp_speed((state.agent_vel + force * DT) * (1.0 - FRICTION))
    raw_pos = state.agent_pos + vel * DT
    new_pos = _clamp_arena(raw_pos)
    # walls absorb momentum: pressing into a boundary zeroes that component
    vel = np.where(raw_pos == new_pos, vel, 0.0)

    object_pos = state.object_pos
    if task.has_object:
        contact = float(np.linalg.norm(state.agent_pos - state.object_pos))
        if contact < CONTACT_RADIUS:
            object_pos = _clamp_arena(state.object_pos + (new_pos - state.agent_pos))

    nxt = EnvState(
        agent_pos=new_pos,
        agent_vel=vel,
        object_pos=object_pos,
        goal_pos=state.goal_pos,
        t=state.t + 1,
    )
    return nxt, nxt.t >= HORIZON


def reset_state(task, rng: np.random.Generator) -> EnvState:
    """Sample an episode start: random agent (and object) away from the goal."""
    goal = task.goal_pos
    while True:
        agent = rng.uniform(-0.9, 0.9, size=2)
        if np.linalg.norm(agent - goal) > 3.0 * task.success_radius:
            break
    if task.has_object:
        while True:
            obj = rng.uniform(-0.6, 0.6, size=2)
            if (
                np.linalg.norm(obj - goal) > 3.0 * task.success_radius
                and np.linalg.norm(obj - agent) > CONTACT_RADIUS
            ):
                break
    else:
        obj = np.zeros(2)
    return EnvState(
        agent_pos=agent,
        agent_vel=np.zeros(2),
        object_pos=obj,
        goal_pos=goal.copy(),
        t=0,
    )

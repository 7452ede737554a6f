"""Episode trace I/O (JSONL) and scripted rollouts."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from prefloop.envsim.dynamics import (
    CONTACT_RADIUS,
    HORIZON,
    Action,
    EnvState,
    reset_state,
    step,
)


def save_trace_jsonl(path, rows: list[dict]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path


def load_trace_jsonl(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing trace file {path}")
    with path.open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def _step_row(task, state: EnvState, action: np.ndarray, renderer) -> dict:
    return {
        "state": state.to_vector().tolist(),
        "action": action.tolist(),
        "observation": renderer.observe(state).tolist(),
        "true_progress": task.true_progress(state),
    }


def expert_action(task, state: EnvState, kp: float = 4.0, kd: float = 2.0) -> np.ndarray:
    """Proportional controller toward the goal (via the object for push)."""
    if task.has_object:
        d_ao = float(np.linalg.norm(state.agent_pos - state.object_pos))
        if d_ao >= CONTACT_RADIUS * 0.8:
            target = state.object_pos
        else:
            target = state.goal_pos
    else:
        target = state.goal_pos
    force = kp * (target - state.agent_pos) - kd * state.agent_vel
    return np.clip(force, -1.0, 1.0)


def rollout_scripted_expert(task, renderer, rng: np.random.Generator,
                            horizon: int = HORIZON) -> list[dict]:
    """One expert episode as a list of JSONL-ready step rows."""
    state = reset_state(task, rng)
    rows = []
    for _ in range(horizon):
        action = expert_action(task, state)
        rows.append(_step_row(task, state, action, renderer))
        state, done = step(state, Action(action), task)
        if done:
            break
    return rows


def rollout_policy(task, renderer, act_fn, rng: np.random.Generator,
                   horizon: int = HORIZON) -> tuple[list[dict], bool]:
    """Roll a policy for one episode; success means ending at the goal."""
    state = reset_state(task, rng)
    rows = []
    for _ in range(horizon):
        action = act_fn(state.to_vector())
        rows.append(_step_row(task, state, action, renderer))
        state, done = step(state, Action(action), task)
        if done:
            break
    return rows, task.is_success(state)
